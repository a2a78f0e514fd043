"""Face-to-face setpoints for visual servoing toward a human diver.

Stereo torso keypoints are triangulated, given a body-fixed frame, rotated
and translated into a face-to-face configuration, and projected back into
the image as a scale-preserving setpoint.
"""

from .body_frame import (
    BodyFrame,
    TorsoPose3D,
    alignment_vector,
    build_body_frame,
    center_of_keypoints,
    frame_angular_error,
    torso_center,
)
from .camera import (
    CameraIntrinsics,
    StereoRig,
    load_calibration,
    project,
    project_stereo,
    rig_from_json,
    triangulate_pair,
    triangulate_pose,
)
from .errors import *  # noqa: F401,F403
from .evaluation import (
    EvaluationRow,
    EvaluationTable,
    PipelineConfig,
    RatingMatrix,
    evaluate_sequence,
    fleiss_kappa,
    process_frame,
    run_sweep,
)
from .keypoints import (
    REQUIRED,
    Keypoint2D,
    KeypointId,
    PoseObservation2D,
    Side,
    filter_by_confidence,
    require_complete,
)
from .setpoint import (
    RigidTransform,
    Setpoint,
    SetpointError,
    anti_align_transform,
    compute_setpoint,
    kabsch_rotation,
    setpoint_error,
)
from .synth import (
    BodyShape,
    CanonicalPose,
    FreePose,
    NoiseSpec,
    Scenario,
    make_torso,
    observe,
    perturb_alignment,
)

__version__ = "0.1.0"
