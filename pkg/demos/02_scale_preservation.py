# %% [markdown]
# # Setpoints keep the diver's own proportions
#
# Two divers with different shoulder widths, in whatever orientation, get
# setpoints whose shoulder spread is in proportion to their real shoulders.
# Halving the standoff doubles every spread.

# %%
from f2f import build_body_frame, compute_setpoint, triangulate_pose
from f2f.setpoint import shoulder_spread
from f2f.synth import TABLE_POSES, BodyShape, default_rig, make_torso, observe

rig = default_rig()


def setpoint_for(shape, pose, distance_m):
    torso, _ = make_torso(shape, pose, (0.0, 0.0, 2.0))
    left, right = observe(rig, torso)
    p = triangulate_pose(rig, left, right)
    return compute_setpoint(p, build_body_frame(p), rig.intrinsics, distance_m)


# %%
narrow, broad = BodyShape(shoulder_width_m=0.40), BodyShape(shoulder_width_m=0.50)
for pose in TABLE_POSES:
    a = shoulder_spread(setpoint_for(narrow, pose, 2.0))
    b = shoulder_spread(setpoint_for(broad, pose, 2.0))
    print(f"{pose.label:18s} 0.40 m -> {a:6.2f} px   0.50 m -> {b:6.2f} px   ratio {a / b:.6f}")

# %%
for d in (1.0, 1.5, 2.0, 3.0):
    print(f"standoff {d:.1f} m: shoulder spread {shoulder_spread(setpoint_for(broad, 'upright_away', d)):7.2f} px")
