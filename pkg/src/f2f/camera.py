"""Pinhole camera and rectified stereo rig.

Camera axes: x right, y down, z along the optical axis. Both cameras of the
rig share intrinsics; the right camera sits ``baseline_m`` along +x of the
left one. Every 3D result is expressed in the left-camera frame.

Input must already be rectified. No distortion model is applied.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .body_frame import TorsoPose3D
from .errors import (
    CalibrationError,
    EpipolarViolation,
    GeometryError,
    InsufficientKeypoints,
    NonPositiveDepth,
    NonPositiveDisparity,
    with_keypoint,
)
from .keypoints import REQUIRED, PoseObservation2D, missing_ids

DEFAULT_VERT_TOL_PX = 5.0


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        for name in ("fx", "fy", "cx", "cy"):
            if not math.isfinite(getattr(self, name)):
                raise CalibrationError(name, "must be finite")
        if self.width <= 0:
            raise CalibrationError("width", f"must be positive, got {self.width}")
        if self.height <= 0:
            raise CalibrationError("height", f"must be positive, got {self.height}")
        if self.fx <= 0:
            raise CalibrationError("fx", f"must be > 0, got {self.fx}")
        if self.fy <= 0:
            raise CalibrationError("fy", f"must be > 0, got {self.fy}")
        if not 0 < self.cx < self.width:
            raise CalibrationError("cx", f"must lie in (0, {self.width}), got {self.cx}")
        if not 0 < self.cy < self.height:
            raise CalibrationError("cy", f"must lie in (0, {self.height}), got {self.cy}")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    def in_bounds(self, u: float, v: float, margin_px: float = 0.0) -> bool:
        return (-margin_px <= u <= self.width + margin_px
                and -margin_px <= v <= self.height + margin_px)


@dataclass(frozen=True)
class StereoRig:
    intrinsics: CameraIntrinsics
    baseline_m: float

    def __post_init__(self):
        if not (math.isfinite(self.baseline_m) and self.baseline_m > 0):
            raise CalibrationError("baseline_m", f"must be > 0, got {self.baseline_m}")

    @property
    def right_offset(self) -> np.ndarray:
        """Position of the right camera centre in the left-camera frame."""
        return np.array([self.baseline_m, 0.0, 0.0])

    def to_json(self) -> dict:
        k = self.intrinsics
        return {"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
                "width": k.width, "height": k.height, "baseline_m": self.baseline_m}


_CALIB_FIELDS = {"fx": float, "fy": float, "cx": float, "cy": float,
                 "width": int, "height": int, "baseline_m": float}


def rig_from_json(obj) -> StereoRig:
    """Validate a calibration record and build the rig.

    Raises :class:`CalibrationError` naming the first offending field.
    """
    if not isinstance(obj, dict):
        raise CalibrationError("<root>", "expected a JSON object")
    vals = {}
    for name, kind in _CALIB_FIELDS.items():
        if name not in obj:
            raise CalibrationError(name, "missing")
        v = obj[name]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise CalibrationError(name, f"expected a number, got {v!r}")
        if kind is int and not float(v).is_integer():
            raise CalibrationError(name, f"expected an integer, got {v!r}")
        vals[name] = kind(v)
    baseline = vals.pop("baseline_m")
    return StereoRig(CameraIntrinsics(**vals), baseline)


def load_calibration(path: str | os.PathLike) -> StereoRig:
    with open(path) as fp:
        try:
            obj = json.load(fp)
        except json.JSONDecodeError as exc:
            raise CalibrationError("<root>", f"invalid JSON ({exc.msg})") from None
    return rig_from_json(obj)


def project(intrinsics: CameraIntrinsics, point3) -> tuple[float, float]:
    x, y, z = (float(c) for c in point3)
    if not z > 0:
        raise NonPositiveDepth(f"point depth z={z} must be positive")
    k = intrinsics
    return k.fx * x / z + k.cx, k.fy * y / z + k.cy


def project_stereo(rig: StereoRig, point3):
    """Project a left-frame point into the left and right images."""
    p = np.asarray(point3, dtype=float)
    return project(rig.intrinsics, p), project(rig.intrinsics, p - rig.right_offset)


def triangulate_pair(rig: StereoRig, left, right,
                     vert_tol_px: float = DEFAULT_VERT_TOL_PX) -> np.ndarray:
    (ul, vl), (ur, vr) = left, right
    d = ul - ur
    if not d > 0:
        raise NonPositiveDisparity(f"disparity {d} px must be positive")
    if abs(vl - vr) > vert_tol_px:
        raise EpipolarViolation(
            f"vertical residual {abs(vl - vr):.3f} px exceeds {vert_tol_px} px")
    k = rig.intrinsics
    z = k.fx * rig.baseline_m / d
    x = (ul - k.cx) * z / k.fx
    y = ((vl + vr) / 2.0 - k.cy) * z / k.fy
    return np.array([x, y, z])


def triangulate_pose(rig: StereoRig, left_obs: PoseObservation2D,
                     right_obs: PoseObservation2D,
                     vert_tol_px: float = DEFAULT_VERT_TOL_PX) -> TorsoPose3D:
    """Triangulate each required keypoint from an already-filtered pair."""
    missing = set(missing_ids(left_obs)) | set(missing_ids(right_obs))
    if missing:
        raise InsufficientKeypoints(missing)
    pts = []
    for kid in REQUIRED:
        try:
            pts.append(triangulate_pair(rig, left_obs.uv(kid), right_obs.uv(kid),
                                        vert_tol_px))
        except GeometryError as exc:
            raise with_keypoint(exc, kid)
    return TorsoPose3D(np.array(pts))
