"""Desk-scale grasp point detection and kitting support toolkit."""

__version__ = "0.1.0"

from .depth_io import (
    CameraIntrinsics,
    DepthMap,
    NormalMap,
    deproject,
    estimate_normals,
    load_pfm,
    project,
    save_pfm,
)
from .gripper_models import (
    GripperKind,
    GripperModel,
    GripperTemplateSet,
    build_templates,
    load_gripper_config,
)
from .graspability import (
    DetectionParams,
    GraspabilityMaps,
    GraspCandidate,
    compute_g4,
    compute_g6,
    compute_omega,
    detect,
    extract_candidates,
)
from .scene_synth import (
    BinModel,
    Primitive,
    Shape,
    SyntheticScene,
    apply_noise,
    generate_benchmark,
    load_scene,
    render,
    save_scene,
)
from .evaluation import (
    CandidateVerdict,
    ClassificationMargins,
    EvaluationReport,
    Verdict,
    classify,
    run_benchmark,
    valid_rate,
)
from .handeye import (
    CalibrationSample,
    DegenerateMotionError,
    generate_dataset,
    read_samples,
    residual,
    solve_handeye,
    write_samples,
)
from .pick_check import (
    PickedWhen,
    PressureReading,
    RednessCheckConfig,
    redness_picked,
    suction_picked,
    width_picked,
)
from .assembly_graph import (
    AssemblyGraph,
    Frame,
    FrameKind,
    parse_assembly,
    resolve,
    swap_part,
)
from .transforms import RigidTransform
