"""Synthetic divers: torso geometry, canonical poses, stereo observations.

Model coordinates coincide with camera coordinates for a diver standing
upright and facing the camera (x right, y down, z away from the camera).
Relative to the torso centre (mean of shoulders and hips):

    ==============  ====================================
    left shoulder   (+shoulder_width/2, -torso_height/2, 0)
    right shoulder  (-shoulder_width/2, -torso_height/2, 0)
    left hip        (+hip_width/2,      +torso_height/2, 0)
    right hip       (-hip_width/2,      +torso_height/2, 0)
    neck base       (0,                 -torso_height/2, 0)
    nose bridge     neck + (0, -superior_m, -anterior_m)
    ==============  ====================================

A diver facing the camera has their left side on the image right. The
canonical poses are fixed rotations of that reference about the torso
centre, in camera axes:

    ================  ===========  ===========================================
    pose              rotation     diver
    ================  ===========  ===========================================
    upright_facing    identity     head up, chest toward camera
    upright_away      R_y(180)     head up, back toward camera
    inverted_facing   R_z(180)     head down, chest toward camera
    inverted_away     R_x(180)     head down, back toward camera
    prone_bottom      R_x(+90)     horizontal, head toward camera, chest down
    prone_surface     R_x(-90)     horizontal, head away, chest up
    ================  ===========  ===========================================
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .body_frame import BodyFrame, TorsoPose3D
from .camera import StereoRig, project_stereo
from .errors import BehindCamera, OutOfView
from .keypoints import REQUIRED, Keypoint2D, PoseObservation2D, Side

#: Detector test error, used as the default per-axis pixel noise.
DETECTOR_TEST_ERROR_PX = 12.75

PERTURB_BOUNDS_DEG = (25.0, 15.0, 5.0)


@dataclass(frozen=True)
class BodyShape:
    shoulder_width_m: float = 0.45
    hip_width_m: float = 0.35
    torso_height_m: float = 0.55
    nose_superior_m: float = 0.25
    nose_anterior_m: float = 0.10

    def __post_init__(self):
        for name, value in vars(self).items():
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")

    def model_points(self) -> np.ndarray:
        """Keypoints in model coordinates, rows in ``REQUIRED`` order."""
        sw, hw, h = self.shoulder_width_m / 2, self.hip_width_m / 2, self.torso_height_m / 2
        neck = np.array([0.0, -h, 0.0])
        table = {
            "b": neck + [0.0, -self.nose_superior_m, -self.nose_anterior_m],
            "n": neck,
            "rs": [-sw, -h, 0.0],
            "rh": [-hw, h, 0.0],
            "lh": [hw, h, 0.0],
            "ls": [sw, -h, 0.0],
        }
        return np.array([table[k.value] for k in REQUIRED], dtype=float)

    def model_frame(self) -> BodyFrame:
        """Body frame of the reference pose, in model coordinates."""
        origin = self.model_points().mean(axis=0)
        return BodyFrame(origin, [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0])


class CanonicalPose(str, enum.Enum):
    PRONE_SURFACE = "prone_surface"
    PRONE_BOTTOM = "prone_bottom"
    UPRIGHT_AWAY = "upright_away"
    UPRIGHT_FACING = "upright_facing"
    INVERTED_FACING = "inverted_facing"
    INVERTED_AWAY = "inverted_away"

    def __str__(self) -> str:
        return self.value

    @property
    def label(self) -> str:
        """Human-readable table label, e.g. ``Prone (surface)``."""
        posture, qualifier = self.value.split("_")
        return f"{posture.capitalize()} ({qualifier})"

    @property
    def rotation(self) -> np.ndarray:
        return _CANONICAL_ROTATIONS[self].copy()


def _rot(axis: str, deg: float) -> np.ndarray:
    m = Rotation.from_euler(axis, deg, degrees=True).as_matrix()
    return np.round(m, 15) + 0.0  # exact 0/+-1 for quarter turns


_CANONICAL_ROTATIONS = {
    CanonicalPose.UPRIGHT_FACING: np.eye(3),
    CanonicalPose.UPRIGHT_AWAY: _rot("y", 180),
    CanonicalPose.INVERTED_FACING: _rot("z", 180),
    CanonicalPose.INVERTED_AWAY: _rot("x", 180),
    CanonicalPose.PRONE_BOTTOM: _rot("x", 90),
    CanonicalPose.PRONE_SURFACE: _rot("x", -90),
}

#: Row order of the evaluation table.
TABLE_POSES = tuple(CanonicalPose)


@dataclass(frozen=True, eq=False)
class FreePose:
    """Arbitrary orientation (about the torso centre) and torso-centre position."""

    rotation: np.ndarray
    position: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 2.0]))

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))


def make_torso(shape: BodyShape, pose: CanonicalPose | FreePose = CanonicalPose.UPRIGHT_FACING,
               position=None) -> tuple[TorsoPose3D, BodyFrame]:
    """Place a diver in front of the camera.

    ``position`` is where the torso centre lands (default ``(0, 0, 2)``, or
    the position carried by a :class:`FreePose`). Returns the keypoints and
    the analytically known body frame.
    """
    if isinstance(pose, FreePose):
        rot = pose.rotation
        pos = pose.position if position is None else np.asarray(position, dtype=float)
    else:
        rot = CanonicalPose(pose).rotation
        pos = np.array([0.0, 0.0, 2.0]) if position is None else np.asarray(position, dtype=float)
    pts = shape.model_points() @ rot.T + pos
    behind = [REQUIRED[i] for i in np.flatnonzero(pts[:, 2] <= 0)]
    if behind:
        raise BehindCamera(f"keypoints behind the camera: {[k.value for k in behind]}")
    ref = shape.model_frame()
    frame = BodyFrame(rot @ ref.origin + pos, rot @ ref.x_axis,
                      rot @ ref.y_axis, rot @ ref.z_axis)
    return TorsoPose3D(pts), frame


def random_body_shape(rng: np.random.Generator) -> BodyShape:
    return BodyShape(
        shoulder_width_m=rng.uniform(0.35, 0.55),
        hip_width_m=rng.uniform(0.25, 0.45),
        torso_height_m=rng.uniform(0.45, 0.65),
        nose_superior_m=rng.uniform(0.15, 0.30),
        nose_anterior_m=rng.uniform(0.05, 0.15),
    )


def random_free_pose(rng: np.random.Generator, depth_range=(1.0, 3.0),
                     lateral_m: float = 0.3) -> FreePose:
    rot = Rotation.random(random_state=rng).as_matrix()
    pos = np.array([rng.uniform(-lateral_m, lateral_m),
                    rng.uniform(-lateral_m, lateral_m),
                    rng.uniform(*depth_range)])
    return FreePose(rot, pos)


@dataclass(frozen=True)
class NoiseSpec:
    sigma_px: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.sigma_px) and self.sigma_px >= 0):
            raise ValueError(f"sigma_px must be >= 0, got {self.sigma_px}")

    def trial(self, index: int) -> "NoiseSpec":
        """Derived spec for one trial of a sweep (seed + index)."""
        return NoiseSpec(self.sigma_px, self.seed + index)


def observe(rig: StereoRig, pose: TorsoPose3D, noise: NoiseSpec = NoiseSpec(),
            frame_id: int = 0, margin_px: float = 0.0
            ) -> tuple[PoseObservation2D, PoseObservation2D]:
    """Project a pose into both cameras and add i.i.d. Gaussian pixel noise.

    Bounds are checked on the noiseless projections; pass
    ``margin_px=math.inf`` to disable the check.
    """
    clean = np.array([np.concatenate(project_stereo(rig, p)) for p in pose.points])
    k = rig.intrinsics
    for side, cols in ((Side.LEFT, slice(0, 2)), (Side.RIGHT, slice(2, 4))):
        out = [REQUIRED[i] for i, (u, v) in enumerate(clean[:, cols])
               if not k.in_bounds(u, v, margin_px)]
        if out:
            raise OutOfView(out, side=side.value)
    rng = np.random.default_rng(noise.seed)
    noisy = clean + noise.sigma_px * rng.standard_normal(clean.shape)
    left = [Keypoint2D(kid, u, v, 1.0) for kid, (u, v) in zip(REQUIRED, noisy[:, 0:2])]
    right = [Keypoint2D(kid, u, v, 1.0) for kid, (u, v) in zip(REQUIRED, noisy[:, 2:4])]
    return (PoseObservation2D(frame_id, Side.LEFT, left),
            PoseObservation2D(frame_id, Side.RIGHT, right))


# -- alignment-vector perturbation -------------------------------------------
# Spherical coordinates with the polar axis along camera y and azimuth
# measured in the z-x plane from +z toward +x:
#   x = sin(theta) sin(phi),  y = cos(theta),  z = sin(theta) cos(phi)

_POLE_EPS = 1e-9


def to_spherical(v) -> tuple[float, float]:
    x, y, z = np.asarray(v, dtype=float) / np.linalg.norm(v)
    return math.acos(max(-1.0, min(1.0, y))), math.atan2(x, z)


def from_spherical(theta, phi) -> np.ndarray:
    theta, phi = np.asarray(theta), np.asarray(phi)
    st = np.sin(theta)
    return np.stack([st * np.sin(phi), np.cos(theta), st * np.cos(phi)], axis=-1)


def perturb_alignment(z_axis, theta_bound_deg: float, phi_bound_deg: float | None = None,
                      count: int = 1, seed: int = 0) -> np.ndarray:
    """Random unit vectors near ``z_axis`` in a (theta, phi) box.

    Returns a ``(count, 3)`` array. Polar angles are clamped away from the
    poles; azimuths wrap.
    """
    if phi_bound_deg is None:
        phi_bound_deg = theta_bound_deg
    if theta_bound_deg < 0 or phi_bound_deg < 0:
        raise ValueError("angle bounds must be non-negative")
    if count < 1:
        raise ValueError("count must be at least 1")
    theta0, phi0 = to_spherical(z_axis)
    if theta_bound_deg == 0 and phi_bound_deg == 0:
        unit = np.asarray(z_axis, dtype=float) / np.linalg.norm(z_axis)
        return np.tile(unit, (count, 1))
    rng = np.random.default_rng(seed)
    tb, pb = math.radians(theta_bound_deg), math.radians(phi_bound_deg)
    theta = rng.uniform(theta0 - tb, theta0 + tb, count)
    phi = rng.uniform(phi0 - pb, phi0 + pb, count)
    theta = np.clip(theta, _POLE_EPS, math.pi - _POLE_EPS)
    out = from_spherical(theta, phi)
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def default_rig() -> StereoRig:
    """640x480 rectified pair used by the harness and demos."""
    from .camera import CameraIntrinsics

    return StereoRig(CameraIntrinsics(400.0, 400.0, 320.0, 240.0, 640, 480), 0.12)


# -- scenarios -----------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    """A batch of synthetic frames: every pose at every distance, ``trials`` times.

    JSON form (all keys optional)::

        {"shape": {"shoulder_width_m": 0.45, ...},
         "poses": ["upright_facing", ...], "distances": [1, 2, 3],
         "rig": {"fx": 400, ..., "baseline_m": 0.12},
         "noise": {"sigma_px": 12.75, "seed": 0},
         "trials": 50, "margin_px": 0}
    """

    shape: BodyShape = BodyShape()
    poses: tuple[CanonicalPose, ...] = TABLE_POSES
    distances: tuple[float, ...] = (2.0,)
    rig: StereoRig = field(default_factory=default_rig)
    noise: NoiseSpec = NoiseSpec()
    trials: int = 1
    margin_px: float = 0.0

    @property
    def n_frames(self) -> int:
        return len(self.poses) * len(self.distances) * self.trials

    @classmethod
    def from_json(cls, obj) -> "Scenario":
        from .camera import rig_from_json
        from .errors import InputError

        if not isinstance(obj, dict):
            raise InputError("scenario must be a JSON object")
        try:
            kwargs = {}
            if "shape" in obj:
                kwargs["shape"] = BodyShape(**obj["shape"])
            if "poses" in obj:
                kwargs["poses"] = tuple(CanonicalPose(p) for p in obj["poses"])
            if "distances" in obj:
                kwargs["distances"] = tuple(float(d) for d in obj["distances"])
                if not all(d > 0 for d in kwargs["distances"]):
                    raise ValueError("distances must be positive")
            if "rig" in obj:
                kwargs["rig"] = rig_from_json(obj["rig"])
            if "noise" in obj:
                kwargs["noise"] = NoiseSpec(**obj["noise"])
            if "trials" in obj:
                kwargs["trials"] = int(obj["trials"])
                if kwargs["trials"] < 1:
                    raise ValueError("trials must be at least 1")
            if "margin_px" in obj:
                kwargs["margin_px"] = float(obj["margin_px"])
        except InputError:
            raise
        except (TypeError, ValueError) as exc:
            raise InputError(f"invalid scenario: {exc}") from None
        return cls(**kwargs)

    def frames(self):
        """Yield ``(left, right, truth)`` per frame in a fixed order.

        Frame ``i`` uses noise seed ``noise.seed + i``.
        """
        frame_id = 0
        for pose in self.poses:
            for d in self.distances:
                torso, gt = make_torso(self.shape, pose, (0.0, 0.0, d))
                for _ in range(self.trials):
                    left, right = observe(self.rig, torso, self.noise.trial(frame_id),
                                          frame_id, self.margin_px)
                    truth = {"frame": frame_id, "pose": pose.value, "distance_m": d,
                             "points": torso.to_json(), "body_frame": gt.to_json()}
                    yield left, right, truth
                    frame_id += 1
