import itertools

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from f2f.body_frame import (
    BodyFrame,
    TorsoPose3D,
    alignment_vector,
    build_body_frame,
    center_of_keypoints,
    frame_angular_error,
)
from f2f.errors import DegenerateTorso, DegenerateYAxis
from f2f.keypoints import REQUIRED
from f2f.synth import FreePose, make_torso, random_body_shape, random_free_pose


def pose_from(**pts):
    return TorsoPose3D.from_mapping(pts)


def assert_frame_valid(f: BodyFrame):
    m = f.matrix
    np.testing.assert_allclose(np.linalg.norm(m, axis=0), 1.0, atol=1e-9)
    for a, b in itertools.combinations(m.T, 2):
        assert abs(a @ b) < 1e-9
    assert abs(np.linalg.det(m) - 1.0) < 1e-9


def test_torso_pose_invariants():
    with pytest.raises(ValueError):
        TorsoPose3D(np.ones((5, 3)))
    pts = np.ones((6, 3))
    pts[2, 2] = -0.1
    with pytest.raises(ValueError, match="rs"):
        TorsoPose3D(pts)


def test_center_of_identical_points():
    q = np.array([0.3, -0.2, 1.7])
    np.testing.assert_allclose(center_of_keypoints(TorsoPose3D(np.tile(q, (6, 1)))), q,
                               rtol=0, atol=1e-15)


def test_center_of_cube_corners():
    corners = [(0, 0, 1), (1, 0, 1), (0, 1, 1), (1, 1, 1), (0, 0, 2), (1, 0, 2)]
    # by hand: x sum 3, y sum 2, z sum 8
    np.testing.assert_allclose(center_of_keypoints(TorsoPose3D(corners)),
                               [3 / 6, 2 / 6, 8 / 6], atol=1e-15)


def test_center_of_symmetric_diver_is_on_sagittal_plane(shape):
    torso, _ = make_torso(shape, "upright_facing", (0, 0, 2))
    assert abs(center_of_keypoints(torso)[0]) < 1e-15


PLANAR = dict(ls=(0.2, -0.3, 2), rs=(-0.2, -0.3, 2), lh=(0.15, 0.3, 2),
              rh=(-0.15, 0.3, 2), n=(0, -0.3, 2), b=(0, -0.55, 1.9))


def test_planar_torso_normal_is_optical_axis():
    z = alignment_vector(pose_from(**PLANAR))
    np.testing.assert_allclose(np.abs(z), [0, 0, 1], atol=1e-15)
    assert z[2] < 0  # chest toward the camera


def test_collinear_joints_are_degenerate():
    bad = dict(PLANAR, ls=(0.15, -0.3, 2), n=(0.15, 0.0, 2))
    with pytest.raises(DegenerateTorso):
        alignment_vector(pose_from(**bad))


def test_cancelling_normals_are_degenerate():
    bad = dict(PLANAR, lh=(0.2, 0.3, 2), rs=(-0.2, 0.3, 2), rh=(-0.2, -0.3, 2))
    with pytest.raises(DegenerateTorso, match="cancel"):
        alignment_vector(pose_from(**bad))


def test_alignment_vector_is_rotation_equivariant(shape, rng):
    torso, _ = make_torso(shape)
    z0 = alignment_vector(torso)
    c = center_of_keypoints(torso)
    for _ in range(50):
        r = Rotation.random(random_state=rng).as_matrix()
        rotated = TorsoPose3D((torso.points - c) @ r.T + c)
        np.testing.assert_allclose(alignment_vector(rotated), r @ z0, atol=1e-9)


def test_facing_diver_axes(shape):
    torso, _ = make_torso(shape, "upright_facing", (0, 0, 2))
    f = build_body_frame(torso)
    np.testing.assert_allclose(f.z_axis, [0, 0, -1], atol=1e-12)
    np.testing.assert_allclose(f.y_axis, [0, 1, 0], atol=1e-12)
    np.testing.assert_allclose(f.x_axis, [-1, 0, 0], atol=1e-12)
    assert f.z_axis @ [0, 0, 1] < 0


def test_y_axis_is_reorthogonalized():
    # nose bridge off the torso plane tilts the raw hip direction out of plane
    f = build_body_frame(pose_from(**PLANAR))
    raw = np.mean([PLANAR["lh"], PLANAR["rh"]], axis=0) - f.origin
    assert abs(raw @ f.z_axis) > 1e-3
    assert abs(f.y_axis @ f.z_axis) < 1e-12


def test_random_frames_are_orthonormal(rng):
    for _ in range(10_000):
        torso, _ = make_torso(random_body_shape(rng), random_free_pose(rng))
        assert_frame_valid(build_body_frame(torso))


def test_frame_equivariance(shape, rng):
    torso, _ = make_torso(shape, "prone_bottom", (0, 0, 2.5))
    f0 = build_body_frame(torso)
    for _ in range(100):
        r = Rotation.random(random_state=rng).as_matrix()
        t = rng.uniform(-0.2, 0.2, 3)
        moved = TorsoPose3D((torso.points - [0, 0, 2.5]) @ r.T + [0, 0, 2.5] + t)
        f = build_body_frame(moved)
        np.testing.assert_allclose(f.matrix, r @ f0.matrix, atol=1e-9)
        np.testing.assert_allclose(f.origin, r @ (f0.origin - [0, 0, 2.5]) + [0, 0, 2.5] + t,
                                   atol=1e-9)


def test_planar_perpendicularity(rng):
    for _ in range(200):
        shape = random_body_shape(rng)
        torso, _ = make_torso(shape, random_free_pose(rng))
        z = build_body_frame(torso).z_axis
        plane = [torso[k] for k in ("ls", "rs", "lh", "rh", "n")]
        for a, b in itertools.combinations(plane, 2):
            assert abs(z @ (a - b)) < 1e-9


def test_hip_midpoint_at_centre_is_degenerate():
    pts = dict(PLANAR, lh=(0.2, 0.0, 2), rh=(-0.2, 0.0, 2), b=(0, 0.9, 2))
    with pytest.raises(DegenerateYAxis):
        build_body_frame(pose_from(**pts))


def test_hip_direction_parallel_to_normal_is_degenerate():
    pts = dict(PLANAR, lh=(0.2, 0.0, 2), rh=(-0.2, 0.0, 2), b=(0, 0.9, 2.3))
    with pytest.raises(DegenerateYAxis):
        build_body_frame(pose_from(**pts))


def test_frame_json(shape):
    _, gt = make_torso(shape, FreePose(Rotation.from_rotvec([0.3, -1.1, 0.4]).as_matrix(),
                                       [0.05, 0.1, 2.2]))
    obj = gt.to_json()
    assert set(obj) == {"origin", "x", "y", "z"}
    assert all(float(f"{c:.9g}") == c for v in obj.values() for c in v)
    back = BodyFrame.from_json(obj)
    assert frame_angular_error(back, gt) < 1e-8
    np.testing.assert_allclose(back.origin, gt.origin, atol=1e-8)


def test_body_frame_rejects_bad_axes():
    with pytest.raises(ValueError, match="right-handed"):
        BodyFrame([0, 0, 1], [1, 0, 0], [0, 1, 0], [0, 0, -1])
    with pytest.raises(ValueError, match="orthonormal"):
        BodyFrame([0, 0, 1], [1, 0, 0], [1, 0, 0], [0, 0, 1])


def test_angular_error_of_known_rotation():
    r = Rotation.from_rotvec([0, 0.25, 0]).as_matrix()
    a = BodyFrame([0, 0, 1], *np.eye(3))
    b = BodyFrame([0, 0, 1], *(r @ np.eye(3)).T)
    assert frame_angular_error(a, b) == pytest.approx(0.25, abs=1e-12)
    assert frame_angular_error(a, a) == 0.0
