"""Batch evaluation against baseline setpoints, and Fleiss' kappa.

Frames that fail anywhere in the pipeline are dropped and counted. Cell
statistics use the population standard deviation. The "Across" marginals are
unweighted means of the cell means and cell standard deviations, computed
over cells that produced at least one frame.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .body_frame import BodyFrame, TorsoPose3D, build_body_frame
from .camera import DEFAULT_VERT_TOL_PX, StereoRig, triangulate_pose
from .errors import AllFramesFailed, DegenerateAgreement, GeometryError
from .keypoints import (
    DEFAULT_P_CUTOFF,
    REQUIRED,
    PoseObservation2D,
    filter_by_confidence,
)
from .setpoint import (
    DEFAULT_DISTANCE_M,
    Setpoint,
    SetpointError,
    compute_setpoint,
    setpoint_error,
)

MARGINAL_NOTE = ("Across-distance and across-pose marginals are unweighted means "
                 "of cell means and cell standard deviations; failed frames are "
                 "dropped and counted.")


@dataclass(frozen=True)
class PipelineConfig:
    rig: StereoRig
    p_cutoff: float = DEFAULT_P_CUTOFF
    vert_tol_px: float = DEFAULT_VERT_TOL_PX
    distance_m: float = DEFAULT_DISTANCE_M
    center_align: bool = False


@dataclass(frozen=True)
class FrameResult:
    frame_id: int
    pose: TorsoPose3D
    frame: BodyFrame
    setpoint: Setpoint


def process_frame(left: PoseObservation2D, right: PoseObservation2D,
                  config: PipelineConfig) -> FrameResult:
    """Filter, triangulate, build the body frame and compute the setpoint."""
    left = filter_by_confidence(left, config.p_cutoff)
    right = filter_by_confidence(right, config.p_cutoff)
    pose = triangulate_pose(config.rig, left, right, config.vert_tol_px)
    frame = build_body_frame(pose)
    sp = compute_setpoint(pose, frame, config.rig.intrinsics, config.distance_m)
    return FrameResult(left.frame_id, pose, frame, sp)


@dataclass(frozen=True)
class EvaluationRow:
    pose_label: str
    distance_m: float
    mean_px: float
    std_px: float
    min_px: float
    n_frames_used: int
    n_frames_failed: int
    failures: dict = field(default_factory=dict, compare=False)

    @property
    def n_frames(self) -> int:
        return self.n_frames_used + self.n_frames_failed


def aggregate(errors: Sequence[float], pose_label: str = "", distance_m: float = 0.0,
              n_failed: int = 0, failures: dict | None = None) -> EvaluationRow:
    """Mean, population std and min of per-frame error sums.

    ``math.fsum`` makes the result independent of frame order.
    """
    n = len(errors)
    if n == 0:
        raise AllFramesFailed(n_failed, failures)
    mean = math.fsum(errors) / n
    var = math.fsum((e - mean) ** 2 for e in errors) / n
    return EvaluationRow(pose_label, distance_m, mean, math.sqrt(var), min(errors),
                         n, n_failed, dict(failures or {}))


def score_frames(frames: Iterable[tuple[PoseObservation2D, PoseObservation2D]],
                 baseline: Setpoint, config: PipelineConfig):
    """Yield ``(frame_id, SetpointError | GeometryError)`` per stereo pair."""
    for left, right in frames:
        try:
            result = process_frame(left, right, config)
            yield left.frame_id, setpoint_error(result.setpoint.points, baseline,
                                                config.center_align)
        except GeometryError as exc:
            yield left.frame_id, exc


def evaluate_sequence(frames, baseline: Setpoint, config: PipelineConfig,
                      pose_label: str = "") -> EvaluationRow:
    errors, failures = [], Counter()
    for _, res in score_frames(frames, baseline, config):
        if isinstance(res, SetpointError):
            errors.append(res.sum_euclidean_px)
        else:
            failures[type(res).__name__] += 1
    return aggregate(errors, pose_label, config.distance_m,
                     sum(failures.values()), dict(failures))


# -- Table layout ----------------------------------------------------------------

def _fmt_distance(d: float) -> str:
    return f"{d:g} m"


@dataclass
class EvaluationTable:
    """Pose rows by distance columns, plus both marginals."""

    poses: list[str]
    distances: list[float]
    cells: dict = field(default_factory=dict)  # (pose, distance) -> EvaluationRow | None
    failed: dict = field(default_factory=dict)  # (pose, distance) -> frames, all-failed cells

    def row_marginal(self, pose: str):
        rows = [self.cells.get((pose, d)) for d in self.distances]
        return _marginal([r for r in rows if r is not None])

    def column_marginal(self, distance: float):
        rows = [self.cells.get((p, distance)) for p in self.poses]
        return _marginal([r for r in rows if r is not None])

    def to_text(self) -> str:
        def cell(stat):
            return "n/a" if stat is None else f"{stat[0]:.2f} ± {stat[1]:.2f}"

        header = ["Pose"] + [_fmt_distance(d) for d in self.distances] + ["Across distances"]
        body = []
        for p in self.poses:
            stats = [self.cells.get((p, d)) for d in self.distances]
            body.append([p] + [cell(None if r is None else (r.mean_px, r.std_px))
                               for r in stats] + [cell(self.row_marginal(p))])
        footer = ["Across poses"] + [cell(self.column_marginal(d)) for d in self.distances] + [""]
        rows = [header] + body + [footer]
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]

        def line(r):
            return " | ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()

        rule = "-+-".join("-" * w for w in widths)
        out = [line(header), rule] + [line(r) for r in body] + [rule, line(footer)]
        used = sum(r.n_frames_used for r in self.cells.values() if r is not None)
        failed = sum(r.n_frames_failed for r in self.cells.values() if r is not None)
        failed += sum(self.failed.values())
        out += ["", f"frames used: {used}, frames failed: {failed}", MARGINAL_NOTE]
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pose", "distance_m", "mean_px", "std_px", "min_px",
                    "n_frames_used", "n_frames_failed"])
        for p in self.poses:
            for d in self.distances:
                r = self.cells.get((p, d))
                if r is None:
                    nf = self.failed.get((p, d), 0)
                    w.writerow([p, f"{d:g}", "", "", "", 0, nf])
                else:
                    w.writerow([p, f"{d:g}", f"{r.mean_px:.6f}", f"{r.std_px:.6f}",
                                f"{r.min_px:.6f}", r.n_frames_used, r.n_frames_failed])
        for p in self.poses:
            m = self.row_marginal(p)
            w.writerow([p, "across", *(("", "") if m is None else
                                       (f"{m[0]:.6f}", f"{m[1]:.6f}")), "", "", ""])
        for d in self.distances:
            m = self.column_marginal(d)
            w.writerow(["across", f"{d:g}", *(("", "") if m is None else
                                              (f"{m[0]:.6f}", f"{m[1]:.6f}")), "", "", ""])
        return buf.getvalue()

    def mark_failed(self, pose: str, distance: float, n_frames: int) -> None:
        self.cells[(pose, distance)] = None
        self.failed[(pose, distance)] = n_frames


def _marginal(rows: list[EvaluationRow]):
    if not rows:
        return None
    return (math.fsum(r.mean_px for r in rows) / len(rows),
            math.fsum(r.std_px for r in rows) / len(rows))


def build_table(groups: dict, baselines: dict, config: PipelineConfig,
                poses: Sequence[str] | None = None) -> EvaluationTable:
    """Evaluate grouped frames into a table.

    ``groups`` maps ``(pose_label, distance_m)`` to a list of stereo pairs and
    ``baselines`` maps ``distance_m`` to the baseline :class:`Setpoint`.
    Each cell is scored at its own distance.
    """
    pose_order = list(poses) if poses else list(dict.fromkeys(p for p, _ in groups))
    distances = sorted({d for _, d in groups})
    table = EvaluationTable(pose_order, distances)
    for (p, d), frames in groups.items():
        cfg = PipelineConfig(config.rig, config.p_cutoff, config.vert_tol_px, d,
                             config.center_align)
        try:
            table.cells[(p, d)] = evaluate_sequence(frames, baselines[d], cfg, p)
        except AllFramesFailed as exc:
            table.mark_failed(p, d, exc.n_frames)
    return table


def noise_vert_tol(sigma_px: float) -> float:
    """Epipolar tolerance that admits injected noise of ``sigma_px`` per axis.

    The vertical residual of a pair has std ``sqrt(2) * sigma``; four of
    those, floored at the default tolerance.
    """
    return max(DEFAULT_VERT_TOL_PX, 4.0 * math.sqrt(2.0) * sigma_px)


def run_sweep(scenario, center_align: bool = False, p_cutoff: float = DEFAULT_P_CUTOFF,
              vert_tol_px: float | None = None) -> EvaluationTable:
    """Evaluate a synthetic scenario, one cell per (pose, distance).

    The baseline at each distance is the noiseless setpoint of the same diver
    facing the camera at that distance. ``vert_tol_px`` defaults to
    :func:`noise_vert_tol` of the scenario noise.
    """
    if vert_tol_px is None:
        vert_tol_px = noise_vert_tol(scenario.noise.sigma_px)
    from .synth import CanonicalPose, make_torso

    baselines = {}
    for d in scenario.distances:
        torso, frame = make_torso(scenario.shape, CanonicalPose.UPRIGHT_FACING, (0.0, 0.0, d))
        baselines[d] = compute_setpoint(torso, frame, scenario.rig.intrinsics, d)
    groups: dict = {}
    for left, right, truth in scenario.frames():
        label = CanonicalPose(truth["pose"]).label
        groups.setdefault((label, truth["distance_m"]), []).append((left, right))
    config = PipelineConfig(scenario.rig, p_cutoff, vert_tol_px, center_align=center_align)
    return build_table(groups, baselines, config,
                       poses=[CanonicalPose(p).label for p in scenario.poses])


def error_rows_csv(rows: Iterable[tuple[int, str, float, SetpointError]]) -> str:
    """Per-frame CSV: frame, pose_label, distance_m, sum_px, then one column per keypoint."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame", "pose_label", "distance_m", "sum_px"] + [k.value for k in REQUIRED])
    for frame_id, label, d, err in rows:
        w.writerow([frame_id, label, f"{d:g}", f"{err.sum_euclidean_px:.6f}"]
                   + [f"{e:.6f}" for e in err.row()])
    return buf.getvalue()


# -- Inter-rater agreement -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class RatingMatrix:
    """Items by categories table of rating tallies.

    Every row must sum to the same number of raters (``n_subjects``).
    """

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 2:
            raise ValueError("counts must be an items x categories table with >= 2 categories")
        if not np.issubdtype(c.dtype, np.integer):
            if not np.all(np.isfinite(c)) or not np.all(c == np.round(c)):
                raise ValueError("counts must be whole numbers")
            c = c.astype(np.int64)
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        sums = c.sum(axis=1)
        if np.any(sums != sums[0]):
            raise ValueError("every item must be rated by the same number of raters")
        if sums[0] < 2:
            raise ValueError("need at least two raters")
        object.__setattr__(self, "counts", c)

    @property
    def n_subjects(self) -> int:
        return int(self.counts[0].sum())

    @property
    def n_items(self) -> int:
        return self.counts.shape[0]

    @classmethod
    def from_labels(cls, labels, categories=None) -> "RatingMatrix":
        """Build from an items x raters array of category labels."""
        labels = np.asarray(labels)
        cats = sorted(set(labels.ravel().tolist())) if categories is None else list(categories)
        index = {c: j for j, c in enumerate(cats)}
        counts = np.zeros((labels.shape[0], len(cats)), dtype=np.int64)
        for i, row in enumerate(labels):
            for lab in row:
                counts[i, index[lab.item() if hasattr(lab, "item") else lab]] += 1
        return cls(counts)


def fleiss_kappa(matrix) -> float:
    if not isinstance(matrix, RatingMatrix):
        matrix = RatingMatrix(matrix)
    c = matrix.counts.astype(float)
    n = matrix.n_subjects
    p_j = c.sum(axis=0) / c.sum()
    p_i = (np.sum(c * c, axis=1) - n) / (n * (n - 1))
    p_bar = p_i.mean()
    p_e = float(np.sum(p_j ** 2))
    if p_e >= 1.0 - 1e-15:
        raise DegenerateAgreement("all ratings fall in one category; kappa is undefined")
    return float((p_bar - p_e) / (1.0 - p_e))
