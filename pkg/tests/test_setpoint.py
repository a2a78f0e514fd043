import itertools
import json

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from f2f.body_frame import BodyFrame, build_body_frame
from f2f.camera import project
from f2f.errors import MissingKeypoint, NonPositiveDepth, RankDeficient
from f2f.keypoints import REQUIRED, KeypointId
from f2f.setpoint import (
    RigidTransform,
    Setpoint,
    anti_align_transform,
    compute_setpoint,
    kabsch_rotation,
    rmsd,
    rotation_y,
    setpoint_error,
    shoulder_spread,
)
from f2f.synth import BodyShape, CanonicalPose, make_torso, random_body_shape, random_free_pose

IDEAL_AXES = [(-1, 0, 0), (0, 1, 0), (0, 0, -1)]


def random_frame(rng):
    r = Rotation.random(random_state=rng).as_matrix()
    return BodyFrame(rng.uniform(-0.5, 0.5, 3) + [0, 0, 2], *r.T)


# -- Kabsch -------------------------------------------------------------------

def test_kabsch_identity():
    np.testing.assert_allclose(kabsch_rotation(np.eye(3), np.eye(3)), np.eye(3), atol=1e-15)


def test_kabsch_recovers_rotation(rng):
    for _ in range(200):
        r_true = Rotation.random(random_state=rng).as_matrix()
        src = rng.normal(size=(int(rng.integers(3, 10)), 3))
        np.testing.assert_allclose(kabsch_rotation(src, src @ r_true.T), r_true,
                                   atol=1e-9, rtol=0)


def test_kabsch_never_returns_reflection(rng):
    src = rng.normal(size=(6, 3))
    mirrored = src * [1, 1, -1]
    r = kabsch_rotation(src, mirrored)
    assert np.linalg.det(r) == pytest.approx(1.0)


def test_kabsch_beats_random_rotations(rng):
    rots = Rotation.random(10_000, random_state=rng).as_matrix()
    for _ in range(5):
        src = rng.normal(size=(6, 3))
        r_true = Rotation.random(random_state=rng).as_matrix()
        dst = src @ r_true.T + rng.normal(scale=0.1, size=src.shape)
        best = min(rmsd(r, src, dst) for r in rots)
        assert rmsd(kabsch_rotation(src, dst), src, dst) <= best


def test_kabsch_rank_deficient():
    line = np.outer([1.0, 2.0, -0.5], [0.3, 0.4, 0.5])
    with pytest.raises(RankDeficient):
        kabsch_rotation(line, line)


def test_kabsch_shape_checks():
    with pytest.raises(ValueError):
        kabsch_rotation(np.eye(3)[:2], np.eye(3)[:2])
    with pytest.raises(ValueError):
        kabsch_rotation(np.eye(3), np.eye(4)[:3])


# -- anti-alignment -------------------------------------------------------------

def test_ideal_frame_is_fixed_point():
    f = BodyFrame([0, 0, 2.0], *IDEAL_AXES)
    t = anti_align_transform(f, 2.0)
    np.testing.assert_allclose(t.rotation, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(t.translation, 0.0, atol=1e-15)


def test_constraints_hold_for_random_frames(rng):
    for _ in range(500):
        frame = random_frame(rng)
        d = rng.uniform(0.5, 3.0)
        t = anti_align_transform(frame, d)
        out = t.apply_frame(frame)
        assert out.z_axis @ [0, 0, 1] == pytest.approx(-1, abs=1e-9)
        assert out.x_axis @ [1, 0, 0] == pytest.approx(-1, abs=1e-9)
        assert out.y_axis @ [0, 1, 0] == pytest.approx(1, abs=1e-9)
        np.testing.assert_allclose(out.origin, [0, 0, d], atol=1e-9)


def test_rotated_about_y_is_undone():
    r30 = rotation_y(np.radians(30))
    f = BodyFrame([0, 0, 2.0], *(r30 @ np.array(IDEAL_AXES, dtype=float).T).T)
    t = anti_align_transform(f, 2.0)
    np.testing.assert_allclose(t.rotation, rotation_y(np.radians(-30)), atol=1e-12)


def test_anchor_is_sent_to_standoff(rng):
    frame = random_frame(rng)
    anchor = frame.origin + [0.05, -0.1, 0.02]
    t = anti_align_transform(frame, 1.5, anchor=anchor)
    np.testing.assert_allclose(t.apply(anchor), [0, 0, 1.5], atol=1e-12)


def test_distance_must_be_positive():
    with pytest.raises(ValueError):
        anti_align_transform(BodyFrame([0, 0, 2.0], *IDEAL_AXES), 0.0)


def test_rigid_transform_rejects_non_rotation():
    with pytest.raises(ValueError):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


# -- setpoint -------------------------------------------------------------------

def setpoint_for(shape, pose, position, intrinsics, d):
    torso, _ = make_torso(shape, pose, position)
    return compute_setpoint(torso, build_body_frame(torso), intrinsics, d)


def test_facing_diver_at_standoff_is_already_ideal(shape, intrinsics):
    torso, _ = make_torso(shape, "upright_facing", (0, 0, 2))
    sp = compute_setpoint(torso, build_body_frame(torso), intrinsics, 2.0)
    for kid, p in zip(REQUIRED, torso.points):
        np.testing.assert_allclose(sp.points[kid], project(intrinsics, p), atol=1e-6)


def test_spread_scales_inversely_with_distance(shape, intrinsics):
    near = setpoint_for(shape, "prone_surface", (0.1, 0, 2.4), intrinsics, 1.0)
    far = setpoint_for(shape, "prone_surface", (0.1, 0, 2.4), intrinsics, 2.0)
    # shoulders sit on the torso plane at exactly distance_m: spread = fx * width / d
    assert shoulder_spread(near) == pytest.approx(500 * 0.45 / 1.0, abs=1e-9)
    assert shoulder_spread(near) / shoulder_spread(far) == pytest.approx(2.0, abs=1e-6)


def test_body_shape_changes_setpoint(intrinsics):
    narrow = setpoint_for(BodyShape(shoulder_width_m=0.40), "upright_away", None, intrinsics, 2)
    wide = setpoint_for(BodyShape(shoulder_width_m=0.50), "upright_away", None, intrinsics, 2)
    assert shoulder_spread(narrow) / shoulder_spread(wide) == pytest.approx(0.8, abs=1e-6)


def test_transform_is_rigid(rng):
    for _ in range(100):
        torso, _ = make_torso(random_body_shape(rng), random_free_pose(rng))
        frame = build_body_frame(torso)
        moved = anti_align_transform(frame, 2.0).apply(torso.points)
        for i, j in itertools.combinations(range(6), 2):
            assert np.linalg.norm(moved[i] - moved[j]) == pytest.approx(
                np.linalg.norm(torso.points[i] - torso.points[j]), abs=1e-9)


def test_setpoint_independent_of_diver_placement(shape, intrinsics, rng):
    ref = setpoint_for(shape, "upright_facing", (0, 0, 2), intrinsics, 2.0).array()
    for _ in range(200):
        sp = setpoint_for(shape, random_free_pose(rng), None, intrinsics, 2.0)
        np.testing.assert_allclose(sp.array(), ref, atol=1e-9, rtol=0)


def test_spread_strictly_decreasing_in_distance(shape, intrinsics):
    spreads = [shoulder_spread(setpoint_for(shape, "inverted_facing", None, intrinsics, d))
               for d in np.linspace(0.5, 5, 20)]
    assert all(a > b for a, b in zip(spreads, spreads[1:]))


def test_standoff_inside_the_torso_puts_nose_behind_camera(shape, intrinsics):
    with pytest.raises(NonPositiveDepth) as info:
        setpoint_for(shape, "upright_facing", None, intrinsics, 0.05)
    assert info.value.keypoint is KeypointId.NOSE_BRIDGE


def test_setpoint_json(shape, intrinsics):
    sp = setpoint_for(shape, CanonicalPose.PRONE_BOTTOM, None, intrinsics, 3.0)
    obj = json.loads(sp.dumps())
    assert list(obj["points"]) == ["b", "n", "rs", "rh", "lh", "ls"]
    assert Setpoint.from_json(obj) == sp
    with pytest.raises(ValueError):
        Setpoint({"b": (1, 2)}, 2.0)


# -- errors ---------------------------------------------------------------------

@pytest.fixture
def baseline(shape, intrinsics):
    return setpoint_for(shape, "upright_facing", None, intrinsics, 2.0)


def test_error_of_identical_points_is_zero(baseline):
    err = setpoint_error(baseline.points, baseline)
    assert err.sum_euclidean_px == 0.0


def test_centering_removes_translation(baseline):
    shifted = {k: (u + 10, v) for k, (u, v) in baseline.points.items()}
    assert setpoint_error(shifted, baseline, center_align=True).sum_euclidean_px == \
        pytest.approx(0.0, abs=1e-12)
    assert setpoint_error(shifted, baseline).sum_euclidean_px == pytest.approx(60.0)


def test_single_offset_keypoint(baseline):
    obs = dict(baseline.points)
    u, v = obs[KeypointId.LEFT_HIP]
    obs[KeypointId.LEFT_HIP] = (u + 3, v + 4)
    err = setpoint_error(obs, baseline)
    assert err.per_keypoint_px[KeypointId.LEFT_HIP] == pytest.approx(5.0, abs=1e-12)
    assert err.sum_euclidean_px == pytest.approx(5.0, abs=1e-12)
    assert err.sum_euclidean_px == pytest.approx(sum(err.per_keypoint_px.values()), abs=1e-9)


def test_mismatched_ids(baseline):
    obs = {k: v for k, v in baseline.points.items() if k is not KeypointId.NECK_BASE}
    with pytest.raises(MissingKeypoint):
        setpoint_error(obs, baseline)
