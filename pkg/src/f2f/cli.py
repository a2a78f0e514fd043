"""Command-line entry point.

Streams are JSON Lines. Exit codes: 0 success, 2 input or configuration
error, 3 nothing could be computed. A frame that fails is written as an error
record and processing continues.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
from pathlib import Path
from typing import Iterator

import numpy as np

from . import __version__
from .body_frame import build_body_frame
from .camera import DEFAULT_VERT_TOL_PX, load_calibration, triangulate_pose
from .errors import (
    AllFramesFailed,
    DegenerateAgreement,
    GeometryError,
    InputError,
    OutOfView,
)
from .evaluation import (
    PipelineConfig,
    build_table,
    error_rows_csv,
    fleiss_kappa,
    score_frames,
)
from .keypoints import (
    DEFAULT_P_CUTOFF,
    REQUIRED,
    ObservationReader,
    PoseObservation2D,
    Side,
    filter_by_confidence,
)
from .setpoint import DEFAULT_DISTANCE_M, Setpoint, SetpointError, compute_setpoint
from .synth import NoiseSpec, Scenario, perturb_alignment

log = logging.getLogger("f2f")

EXIT_OK, EXIT_INPUT, EXIT_FAILED = 0, 2, 3


class UsageError(Exception):
    pass


# -- stream pairing ------------------------------------------------------------

def _observations(path: str) -> Iterator[PoseObservation2D]:
    with open(path) as fp:
        yield from ObservationReader(fp)


def pair_streams(left_path: str, right_path: str | None = None):
    """Yield ``(frame_id, left, right)``; a missing side is ``None``.

    Records are matched by frame id. Only frames still waiting for their
    partner are buffered, so aligned or interleaved streams use constant
    memory. Unpaired frames come last, in frame order.
    """
    pending = {Side.LEFT: {}, Side.RIGHT: {}}

    def take(obs, want):
        if obs.side is not want:
            return None
        other = Side.RIGHT if want is Side.LEFT else Side.LEFT
        mate = pending[other].pop(obs.frame_id, None)
        if mate is None:
            if obs.frame_id in pending[want]:
                raise InputError(f"duplicate {want.value} record for frame {obs.frame_id}")
            pending[want][obs.frame_id] = obs
            return None
        pair = (obs, mate) if want is Side.LEFT else (mate, obs)
        return (obs.frame_id, *pair)

    if right_path is None or Path(right_path) == Path(left_path):
        for obs in _observations(left_path):
            hit = take(obs, obs.side)
            if hit:
                yield hit
    else:
        streams = [(_observations(left_path), Side.LEFT), (_observations(right_path), Side.RIGHT)]
        while streams:
            for item in list(streams):
                it, want = item
                try:
                    obs = next(it)
                except StopIteration:
                    streams.remove(item)
                    continue
                hit = take(obs, want)
                if hit:
                    yield hit
    leftovers = [(f, o, None) for f, o in pending[Side.LEFT].items()]
    leftovers += [(f, None, o) for f, o in pending[Side.RIGHT].items()]
    yield from sorted(leftovers, key=lambda r: r[0])


def _error_record(frame_id, exc) -> dict:
    rec = {"frame": frame_id, "error": type(exc).__name__, "message": str(exc)}
    kp = getattr(exc, "keypoint", None)
    if kp is not None:
        rec["keypoint"] = kp.value
    missing = getattr(exc, "missing", None)
    if missing:
        rec["missing"] = [k.value for k in missing]
    return rec


def _unpaired(frame_id, left, right) -> dict:
    present = "left" if left is not None else "right"
    return {"frame": frame_id, "error": "unpaired", "side": present}


# -- helpers ---------------------------------------------------------------------

def _check_paths(*paths):
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise UsageError(f"no such file: {p}")


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w") as fp:
            yield fp


def _config(args, distance=None) -> PipelineConfig:
    if args.calib is None:
        raise UsageError("--calib is required")
    _check_paths(args.calib)
    if not 0 <= args.p_cutoff <= 1:
        raise UsageError("--p-cutoff must lie in [0, 1]")
    d = distance if distance is not None else _distance(args)
    if not d > 0:
        raise UsageError("--distance must be positive")
    return PipelineConfig(load_calibration(args.calib), args.p_cutoff, args.vert_tol,
                          d, args.center_align)


def _distance(args) -> float:
    return DEFAULT_DISTANCE_M if args.distance is None else args.distance


def _streams(args):
    if args.left is None:
        raise UsageError("--left is required")
    _check_paths(args.left, args.right)
    return pair_streams(args.left, args.right)


def _dumps(obj) -> str:
    return json.dumps(obj, allow_nan=False)


# -- subcommands -----------------------------------------------------------------

def _run_per_frame(args, emit) -> int:
    config = _config(args)
    n_ok = 0
    with _output(args.out) as out:
        for frame_id, left, right in _streams(args):
            if left is None or right is None:
                out.write(_dumps(_unpaired(frame_id, left, right)) + "\n")
                continue
            try:
                rec = emit(frame_id, left, right, config)
                n_ok += 1
            except GeometryError as exc:
                rec = _error_record(frame_id, exc)
            out.write(_dumps(rec) + "\n")
    return EXIT_OK if n_ok else EXIT_FAILED


def _pose(left, right, config):
    left = filter_by_confidence(left, config.p_cutoff)
    right = filter_by_confidence(right, config.p_cutoff)
    return triangulate_pose(config.rig, left, right, config.vert_tol_px)


def cmd_triangulate(args) -> int:
    def emit(frame_id, left, right, config):
        return {"frame": frame_id, "points": _pose(left, right, config).to_json()}
    return _run_per_frame(args, emit)


def cmd_frame(args) -> int:
    def emit(frame_id, left, right, config):
        return {"frame": frame_id,
                "body_frame": build_body_frame(_pose(left, right, config)).to_json()}
    return _run_per_frame(args, emit)


def cmd_setpoint(args) -> int:
    if not args.aggregate:
        def emit(frame_id, left, right, config):
            pose = _pose(left, right, config)
            sp = compute_setpoint(pose, build_body_frame(pose), config.rig.intrinsics,
                                  config.distance_m)
            return {"frame": frame_id, **sp.to_json()}
        return _run_per_frame(args, emit)

    config = _config(args)
    collected = []
    for frame_id, left, right in _streams(args):
        if left is None or right is None:
            log.warning("frame %s unpaired", frame_id)
            continue
        try:
            pose = _pose(left, right, config)
            sp = compute_setpoint(pose, build_body_frame(pose), config.rig.intrinsics,
                                  config.distance_m)
        except GeometryError as exc:
            log.warning("frame %s: %s", frame_id, exc)
            continue
        collected.append(sp.array())
    if not collected:
        print("error: no frame produced a setpoint", file=sys.stderr)
        return EXIT_FAILED
    mean = np.mean(collected, axis=0)
    sp = Setpoint({k: tuple(mean[i]) for i, k in enumerate(REQUIRED)}, config.distance_m)
    with _output(args.out) as out:
        out.write(_dumps(sp.to_json()) + "\n")
    return EXIT_OK


def _load_baselines(paths) -> dict:
    if not paths:
        raise UsageError("--baseline is required")
    _check_paths(*paths)
    baselines = {}
    for p in paths:
        try:
            with open(p) as fp:
                sp = Setpoint.from_json(json.load(fp))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"invalid baseline {p}: {exc}") from None
        baselines[sp.distance_m] = sp
    return baselines


def _load_truth(path) -> dict:
    _check_paths(path)
    labels = {}
    with open(path) as fp:
        for lineno, text in enumerate(fp, start=1):
            if not text.strip():
                continue
            try:
                rec = json.loads(text)
                labels[int(rec["frame"])] = (str(rec["pose"]), float(rec["distance_m"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise UsageError(f"{path}: line {lineno}: {exc}") from None
    return labels


def cmd_evaluate(args) -> int:
    from .synth import CanonicalPose

    baselines = _load_baselines(args.baseline)
    truth = _load_truth(args.truth) if args.truth else None
    if truth is None:
        if args.distance is not None:
            distance = args.distance
        elif len(baselines) == 1:
            distance = next(iter(baselines))
        else:
            raise UsageError("several baselines given; pass --truth or --distance")
        if distance not in baselines:
            raise UsageError(f"no baseline at distance {distance:g} m")
    config = _config(args, distance=DEFAULT_DISTANCE_M if truth else distance)

    groups: dict = {}
    for frame_id, left, right in _streams(args):
        if left is None or right is None:
            log.warning("frame %s unpaired", frame_id)
            continue
        if truth is None:
            key = (args.label, distance)
        else:
            if frame_id not in truth:
                raise UsageError(f"frame {frame_id} missing from --truth")
            pose, d = truth[frame_id]
            try:
                pose = CanonicalPose(pose).label
            except ValueError:
                pass
            key = (pose, d)
        groups.setdefault(key, []).append((left, right))
    for _, d in groups:
        if d not in baselines:
            raise UsageError(f"no baseline at distance {d:g} m")
    if not groups:
        print("error: no paired frames", file=sys.stderr)
        return EXIT_FAILED

    table = build_table(groups, baselines, config)
    if args.errors:
        rows = []
        for (label, d), frames in groups.items():
            cfg = PipelineConfig(config.rig, config.p_cutoff, config.vert_tol_px, d,
                                 config.center_align)
            for frame_id, res in score_frames(frames, baselines[d], cfg):
                if isinstance(res, SetpointError):
                    rows.append((frame_id, label, d, res))
        rows.sort(key=lambda r: r[0])
        with open(args.errors, "w") as fp:
            fp.write(error_rows_csv(rows))
    with _output(args.out) as out:
        out.write(table.to_csv() if args.format == "csv" else table.to_text())
    if all(r is None for r in table.cells.values()):
        print(str(AllFramesFailed(sum(table.failed.values()))), file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.scenario is None:
        raise UsageError("a scenario file is required")
    _check_paths(args.scenario)
    try:
        with open(args.scenario) as fp:
            scenario = Scenario.from_json(json.load(fp))
    except json.JSONDecodeError as exc:
        raise UsageError(f"invalid scenario JSON: {exc.msg} (line {exc.lineno})") from None
    if args.seed is not None:
        scenario = Scenario(scenario.shape, scenario.poses, scenario.distances, scenario.rig,
                            NoiseSpec(scenario.noise.sigma_px, args.seed), scenario.trials,
                            scenario.margin_px)
    truth_path = args.truth
    if truth_path is None and args.out not in (None, "-"):
        truth_path = str(args.out) + ".truth.jsonl"

    # visibility depends only on (pose, distance): check before writing anything
    from .synth import make_torso, observe
    for pose in scenario.poses:
        for d in scenario.distances:
            torso, _ = make_torso(scenario.shape, pose, (0.0, 0.0, d))
            try:
                observe(scenario.rig, torso, NoiseSpec(), margin_px=scenario.margin_px)
            except OutOfView as exc:
                names = ",".join(k.value for k in exc.keypoints)
                print(f"error: {pose.value} at {d:g} m: {exc} [{names}]", file=sys.stderr)
                return EXIT_INPUT

    sidecar = open(truth_path, "w") if truth_path else contextlib.nullcontext()
    with _output(args.out) as out, sidecar as tfp:
        for left, right, truth in scenario.frames():
            out.write(_dumps(left.to_json()) + "\n")
            out.write(_dumps(right.to_json()) + "\n")
            if tfp is not None:
                tfp.write(_dumps(truth) + "\n")
    return EXIT_OK


def cmd_perturb(args) -> int:
    v = np.asarray(args.vector, dtype=float)
    if not np.all(np.isfinite(v)) or np.linalg.norm(v) == 0:
        raise UsageError("--vector must be a finite non-zero 3-vector")
    phi = args.phi_bound if args.phi_bound is not None else args.bound
    seed = 0 if args.seed is None else args.seed
    try:
        vecs = perturb_alignment(v, args.bound, phi, args.count, seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    with _output(args.out) as out:
        out.write(_dumps({"theta_bound_deg": args.bound, "phi_bound_deg": phi,
                          "vectors": vecs.tolist()}) + "\n")
    return EXIT_OK


def _read_matrix(path) -> np.ndarray:
    _check_paths(path)
    text = Path(path).read_text()
    try:
        if text.lstrip().startswith(("[", "{")):
            obj = json.loads(text)
            obj = obj["counts"] if isinstance(obj, dict) else obj
            return np.asarray(obj)
        rows = [r for r in text.splitlines() if r.strip()]
        return np.array([[float(c) for c in r.split(",")] for r in rows])
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise UsageError(f"invalid rating matrix {path}: {exc}") from None


def cmd_kappa(args) -> int:
    matrix = _read_matrix(args.matrix)
    try:
        k = fleiss_kappa(matrix)
    except DegenerateAgreement as exc:
        with _output(args.out) as out:
            out.write(_dumps({"kappa": None, "reason": str(exc)}) + "\n")
        return EXIT_FAILED
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    with _output(args.out) as out:
        out.write(_dumps({"kappa": k}) + "\n")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="f2f", description="Face-to-face setpoints from stereo torso keypoints.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def pipeline(p):
        p.add_argument("--calib", help="calibration JSON")
        p.add_argument("--left", help="left keypoint stream (JSONL)")
        p.add_argument("--right", help="right keypoint stream; defaults to --left")
        p.add_argument("--p-cutoff", type=float, default=DEFAULT_P_CUTOFF,
                       help="drop keypoints with confidence at or below this")
        p.add_argument("--vert-tol", type=float, default=DEFAULT_VERT_TOL_PX,
                       help="max vertical disparity in pixels")
        p.add_argument("--distance", type=float, default=None,
                       help=f"standoff in meters (default {DEFAULT_DISTANCE_M:g})")
        p.add_argument("--center-align", action="store_true",
                       help="subtract centroids before comparing with a baseline")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--seed", type=int, default=None,
                       help="accepted for a uniform interface; these commands draw no random numbers")
        return p

    pipeline(sub.add_parser("triangulate", help="3D torso keypoints per frame"))
    pipeline(sub.add_parser("frame", help="body frame per frame"))
    p = pipeline(sub.add_parser("setpoint", help="setpoint per frame"))
    p.add_argument("--aggregate", choices=["mean"], default=None)
    p = pipeline(sub.add_parser("evaluate", help="error table against baselines"))
    p.add_argument("--baseline", action="append", help="baseline setpoint JSON (repeatable)")
    p.add_argument("--truth", help="sidecar with per-frame pose and distance labels")
    p.add_argument("--label", default="observed", help="row label without --truth")
    p.add_argument("--format", choices=["csv", "table"], default="table")
    p.add_argument("--errors", help="write per-frame error rows (CSV) here")

    p = sub.add_parser("synth", help="synthetic observation stream")
    p.add_argument("scenario", nargs="?")
    p.add_argument("--out")
    p.add_argument("--truth", help="ground-truth sidecar path")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("perturb", help="perturbed alignment vectors")
    p.add_argument("--vector", type=float, nargs=3, required=True)
    p.add_argument("--bound", type=float, default=25.0, help="theta bound in degrees")
    p.add_argument("--phi-bound", type=float, default=None)
    p.add_argument("--count", type=int, default=3)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")

    p = sub.add_parser("kappa", help="Fleiss' kappa of a rating matrix")
    p.add_argument("matrix", help="CSV or JSON items x categories counts")
    p.add_argument("--out")
    return parser


COMMANDS = {
    "triangulate": cmd_triangulate,
    "frame": cmd_frame,
    "setpoint": cmd_setpoint,
    "evaluate": cmd_evaluate,
    "synth": cmd_synth,
    "perturb": cmd_perturb,
    "kappa": cmd_kappa,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
