"""Body-fixed coordinate frame from six triangulated torso keypoints.

Construction, all in camera coordinates:

1. ``origin`` is the mean of all six keypoints (nose bridge included, so it
   sits above the geometric torso centre).
2. Four in-plane difference vectors::

       lsh = ls - lh    nlh = n - lh
       nrh = n - rh     rsh = rs - rh

3. Two torso normals ``lsh x nlh`` and ``nrh x rsh``; their mean, normalized,
   is the alignment vector and becomes ``z``. For a diver facing the camera
   it points out of the chest, toward the camera.
4. ``y`` points from the origin to the hip midpoint, projected onto the plane
   orthogonal to ``z`` and renormalized. The nose bridge lies off the torso
   plane, so without this projection ``[x y z]`` would not be a rotation.
5. ``x = y x z``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DegenerateTorso, DegenerateYAxis, InsufficientKeypoints
from .keypoints import REQUIRED, KeypointId

CROSS_EPS = 1e-12
AXIS_EPS = 1e-9

_INDEX = {k: i for i, k in enumerate(REQUIRED)}


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TorsoPose3D:
    """Six 3D keypoints in camera coordinates (meters), rows in ``REQUIRED`` order."""

    points: np.ndarray

    def __post_init__(self):
        pts = _frozen(self.points)
        if pts.shape != (6, 3):
            raise ValueError(f"expected a (6, 3) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("keypoint coordinates must be finite")
        if np.any(pts[:, 2] <= 0):
            bad = [REQUIRED[i].value for i in np.flatnonzero(pts[:, 2] <= 0)]
            raise ValueError(f"keypoints behind the camera: {bad}")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_mapping(cls, points: Mapping) -> "TorsoPose3D":
        table = {KeypointId(k): v for k, v in points.items()}
        missing = [k for k in REQUIRED if k not in table]
        if missing:
            raise InsufficientKeypoints(missing)
        return cls(np.array([table[k] for k in REQUIRED], dtype=float))

    def __getitem__(self, kid) -> np.ndarray:
        return self.points[_INDEX[KeypointId(kid)]]

    def as_dict(self) -> dict[KeypointId, np.ndarray]:
        return {k: self.points[i] for i, k in enumerate(REQUIRED)}

    def transformed(self, rotation, translation) -> "TorsoPose3D":
        return TorsoPose3D(self.points @ np.asarray(rotation).T + translation)

    def to_json(self) -> dict:
        return {k.value: [float(c) for c in self.points[i]]
                for i, k in enumerate(REQUIRED)}


@dataclass(frozen=True, eq=False)
class BodyFrame:
    origin: np.ndarray
    x_axis: np.ndarray
    y_axis: np.ndarray
    z_axis: np.ndarray

    def __post_init__(self):
        for name in ("origin", "x_axis", "y_axis", "z_axis"):
            v = _frozen(getattr(self, name))
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be a finite 3-vector")
            object.__setattr__(self, name, v)
        m = self.matrix
        if np.abs(m.T @ m - np.eye(3)).max() > AXIS_EPS:
            raise ValueError("frame axes are not orthonormal")
        if abs(np.linalg.det(m) - 1.0) > AXIS_EPS:
            raise ValueError("frame axes are not right-handed")

    @property
    def matrix(self) -> np.ndarray:
        """3x3 matrix with the axes as columns (body-to-camera rotation)."""
        return np.column_stack([self.x_axis, self.y_axis, self.z_axis])

    def to_json(self) -> dict:
        def fmt(v):
            return [float(f"{c:.9g}") for c in v]
        return {"origin": fmt(self.origin), "x": fmt(self.x_axis),
                "y": fmt(self.y_axis), "z": fmt(self.z_axis)}

    @classmethod
    def from_json(cls, obj: Mapping) -> "BodyFrame":
        # 9 significant digits do not keep the axes orthonormal to 1e-9
        m = np.column_stack([obj["x"], obj["y"], obj["z"]]).astype(float)
        u, _, vt = np.linalg.svd(m)
        m = u @ vt
        return cls(obj["origin"], m[:, 0], m[:, 1], m[:, 2])


def center_of_keypoints(pose: TorsoPose3D) -> np.ndarray:
    return pose.points.mean(axis=0)


def torso_center(pose: TorsoPose3D) -> np.ndarray:
    """Mean of the shoulders and hips; lies on the torso plane."""
    p = pose
    return (p["ls"] + p["rs"] + p["lh"] + p["rh"]) / 4.0


def alignment_vector(pose: TorsoPose3D) -> np.ndarray:
    p = pose
    k_lsh = p["ls"] - p["lh"]
    k_nlh = p["n"] - p["lh"]
    k_nrh = p["n"] - p["rh"]
    k_rsh = p["rs"] - p["rh"]
    left = np.cross(k_lsh, k_nlh)
    right = np.cross(k_nrh, k_rsh)
    if np.linalg.norm(left) < CROSS_EPS:
        raise DegenerateTorso("left shoulder, left hip and neck are collinear")
    if np.linalg.norm(right) < CROSS_EPS:
        raise DegenerateTorso("right shoulder, right hip and neck are collinear")
    mean = (right + left) / 2.0
    norm = np.linalg.norm(mean)
    if norm < CROSS_EPS:
        raise DegenerateTorso("left and right torso normals cancel")
    return mean / norm


def build_body_frame(pose: TorsoPose3D) -> BodyFrame:
    z = alignment_vector(pose)
    origin = center_of_keypoints(pose)
    midpt = (pose["lh"] + pose["rh"]) / 2.0
    d = midpt - origin
    dist = np.linalg.norm(d)
    if dist < AXIS_EPS:
        raise DegenerateYAxis("hip midpoint coincides with keypoint centre")
    raw_y = d / dist
    y = raw_y - (raw_y @ z) * z
    ny = np.linalg.norm(y)
    if ny < AXIS_EPS:
        raise DegenerateYAxis("hip direction is parallel to the alignment vector")
    y = y / ny
    x = np.cross(y, z)
    return BodyFrame(origin, x, y, z)


def frame_angular_error(a: BodyFrame, b: BodyFrame) -> float:
    """Geodesic angle (radians) between the orientations of two frames."""
    r = a.matrix @ b.matrix.T
    c = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    # arccos loses precision near zero; recover from the skew part
    s = np.linalg.norm([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]]) / 2.0
    return float(np.arctan2(s, c))
