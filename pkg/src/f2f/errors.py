"""Exception hierarchy shared by every pipeline stage.

All geometric failures derive from :class:`GeometryError` so that batch
callers (the evaluation harness, the CLI) can treat a frame that cannot be
reconstructed as data rather than as a crash.
"""

from __future__ import annotations

from typing import Iterable


class F2FError(Exception):
    """Base class for all errors raised by this package."""


class InputError(F2FError, ValueError):
    """Malformed or invalid input (calibration, stream, scenario)."""


class CalibrationError(InputError):
    """A calibration record violates a field invariant."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"calibration field {field!r}: {message}")


class StreamParseError(InputError):
    """A JSON Lines record could not be parsed."""

    def __init__(self, line: int, message: str, field: str | None = None):
        self.line = line
        self.field = field
        where = f"line {line}" + (f", field {field!r}" if field else "")
        super().__init__(f"{where}: {message}")


class GeometryError(F2FError):
    """A frame cannot be processed for geometric reasons."""

    keypoint = None


class NonPositiveDepth(GeometryError):
    pass


class NonPositiveDisparity(GeometryError):
    pass


class EpipolarViolation(GeometryError):
    pass


class InsufficientKeypoints(GeometryError):
    """One or more of the six required keypoints is missing."""

    def __init__(self, missing: Iterable):
        self.missing = sorted(missing, key=lambda k: getattr(k, "value", k))
        names = ", ".join(getattr(k, "value", str(k)) for k in self.missing)
        super().__init__(f"missing required keypoints: {names}")


class DegenerateTorso(GeometryError):
    pass


class DegenerateYAxis(GeometryError):
    pass


class RankDeficient(GeometryError):
    pass


class MissingKeypoint(GeometryError):
    pass


class BehindCamera(GeometryError):
    pass


class OutOfView(GeometryError):
    def __init__(self, keypoints: Iterable, side: str | None = None):
        self.keypoints = sorted(keypoints, key=lambda k: getattr(k, "value", k))
        names = ", ".join(getattr(k, "value", str(k)) for k in self.keypoints)
        prefix = f"{side} camera: " if side else ""
        super().__init__(f"{prefix}keypoints out of view: {names}")


class AllFramesFailed(F2FError):
    def __init__(self, n_frames: int, reasons: dict | None = None):
        self.n_frames = n_frames
        self.reasons = reasons or {}
        super().__init__(f"all {n_frames} frames failed: {self.reasons}")


class DegenerateAgreement(F2FError, ValueError):
    """Fleiss' kappa is undefined because expected agreement equals one."""


def with_keypoint(err: GeometryError, keypoint) -> GeometryError:
    """Attach the offending keypoint id to a per-point error."""
    err.keypoint = keypoint
    name = getattr(keypoint, "value", keypoint)
    err.args = (f"[{name}] {err.args[0] if err.args else ''}",)
    return err
