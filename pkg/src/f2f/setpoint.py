"""Anti-aligning rigid transform and the scale-preserved image setpoint.

The rotation is found with Kabsch on the body-frame axes against the camera
basis, then flipped by a half turn about camera y so the diver faces the
camera instead of away from it. Afterwards::

    z_body . z_cam = -1,   x_body . x_cam = -1,   y_body . y_cam = +1

The translation puts an anchor point on the optical axis at the commanded
standoff. :func:`compute_setpoint` anchors on the torso centre (mean of the
shoulders and hips), so the shoulders and hips end up exactly at
``distance_m`` and pixel spreads scale as ``1 / distance_m``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .body_frame import BodyFrame, TorsoPose3D, torso_center
from .camera import CameraIntrinsics, project
from .errors import MissingKeypoint, NonPositiveDepth, RankDeficient, with_keypoint
from .keypoints import REQUIRED, KeypointId

DEFAULT_DISTANCE_M = 2.0
RANK_RTOL = 1e-12


def rotation_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


# exact, so the ideal frame is a fixed point to machine precision
R_Y_PI = np.diag([-1.0, 1.0, -1.0])


@dataclass(frozen=True, eq=False)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float)
        if r.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be 3x3 and translation a 3-vector")
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9, rtol=0):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation is not proper (det != +1)")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def apply(self, points) -> np.ndarray:
        """Transform a point or an ``(n, 3)`` array of points."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def apply_frame(self, frame: BodyFrame) -> BodyFrame:
        r = self.rotation
        return BodyFrame(self.apply(frame.origin), r @ frame.x_axis,
                         r @ frame.y_axis, r @ frame.z_axis)


def kabsch_rotation(source, target) -> np.ndarray:
    """Proper rotation ``R`` minimizing ``sum ||R @ source[i] - target[i]||^2``.

    Rows of ``source`` and ``target`` are corresponding vectors. No centering
    is applied; center point clouds beforehand if a translation is involved.
    """
    a = np.asarray(source, dtype=float)
    b = np.asarray(target, dtype=float)
    if a.ndim != 2 or a.shape[1] != 3 or a.shape != b.shape:
        raise ValueError(f"expected matching (n, 3) arrays, got {a.shape} and {b.shape}")
    if a.shape[0] < 3:
        raise ValueError(f"need at least 3 correspondences, got {a.shape[0]}")
    h = a.T @ b
    u, s, vt = np.linalg.svd(h)
    if s[0] == 0 or s[1] <= RANK_RTOL * s[0]:
        raise RankDeficient(f"covariance singular values {s} leave the rotation undetermined")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    return vt.T @ np.diag([1.0, 1.0, d]) @ u.T


def rmsd(rotation, source, target) -> float:
    diff = np.asarray(source) @ np.asarray(rotation).T - np.asarray(target)
    return float(np.sqrt(np.mean(np.sum(diff ** 2, axis=1))))


def anti_align_transform(frame: BodyFrame, distance_m: float = DEFAULT_DISTANCE_M,
                         anchor=None) -> RigidTransform:
    """Transform taking ``frame`` to the face-to-face configuration.

    ``anchor`` (default: the frame origin) is the point sent to
    ``(0, 0, distance_m)``.
    """
    if not distance_m > 0:
        raise ValueError(f"distance_m must be positive, got {distance_m}")
    body_axes = np.vstack([frame.x_axis, frame.y_axis, frame.z_axis])
    r = R_Y_PI @ kabsch_rotation(body_axes, np.eye(3))
    a = frame.origin if anchor is None else np.asarray(anchor, dtype=float)
    t = np.array([0.0, 0.0, distance_m]) - r @ a
    return RigidTransform(r, t)


@dataclass(frozen=True)
class Setpoint:
    points: Mapping[KeypointId, tuple[float, float]]
    distance_m: float

    def __post_init__(self):
        table = {KeypointId(k): (float(u), float(v)) for k, (u, v) in self.points.items()}
        missing = [k.value for k in REQUIRED if k not in table]
        if missing or len(table) != 6:
            raise ValueError(f"setpoint needs all six keypoints, missing {missing}")
        if not all(math.isfinite(c) for uv in table.values() for c in uv):
            raise ValueError("setpoint coordinates must be finite")
        ordered = {k: table[k] for k in REQUIRED}
        object.__setattr__(self, "points", MappingProxyType(ordered))

    def array(self) -> np.ndarray:
        return np.array([self.points[k] for k in REQUIRED])

    def to_json(self) -> dict:
        return {"distance_m": self.distance_m,
                "points": {k.value: list(self.points[k]) for k in REQUIRED}}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Setpoint":
        return cls(obj["points"], float(obj["distance_m"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def compute_setpoint(pose: TorsoPose3D, frame: BodyFrame, intrinsics: CameraIntrinsics,
                     distance_m: float = DEFAULT_DISTANCE_M) -> Setpoint:
    transform = anti_align_transform(frame, distance_m, anchor=torso_center(pose))
    moved = transform.apply(pose.points)
    pts = {}
    for kid, p in zip(REQUIRED, moved):
        try:
            pts[kid] = project(intrinsics, p)
        except NonPositiveDepth as exc:
            raise with_keypoint(exc, kid)
    return Setpoint(pts, distance_m)


def shoulder_spread(setpoint: Setpoint) -> float:
    (ul, vl), (ur, vr) = setpoint.points[KeypointId.LEFT_SHOULDER], \
        setpoint.points[KeypointId.RIGHT_SHOULDER]
    return math.hypot(ul - ur, vl - vr)


@dataclass(frozen=True)
class SetpointError:
    sum_euclidean_px: float
    per_keypoint_px: Mapping[KeypointId, float] = field(default_factory=dict)

    def row(self) -> list[float]:
        return [self.per_keypoint_px[k] for k in REQUIRED]


def setpoint_error(observed: Mapping, baseline: Setpoint,
                   center_align: bool = False) -> SetpointError:
    """Per-keypoint pixel distance between ``observed`` and ``baseline``.

    ``observed`` maps keypoint ids to ``(u, v)``; a :class:`Setpoint` is also
    accepted. With ``center_align`` both point sets are shifted so that their
    centroids coincide before differencing.
    """
    if isinstance(observed, Setpoint):
        observed = observed.points
    obs = {KeypointId(k): v for k, v in observed.items()}
    if set(obs) != set(baseline.points):
        diff = sorted(set(obs) ^ set(baseline.points), key=lambda k: k.value)
        raise MissingKeypoint(f"keypoint sets differ: {[k.value for k in diff]}")
    a = np.array([obs[k] for k in REQUIRED], dtype=float)
    b = baseline.array()
    if center_align:
        a = a - a.mean(axis=0)
        b = b - b.mean(axis=0)
    d = np.linalg.norm(a - b, axis=1)
    per = {k: float(e) for k, e in zip(REQUIRED, d)}
    return SetpointError(float(sum(per.values())), MappingProxyType(per))
