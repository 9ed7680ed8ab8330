"""Pose data model, file formats, action-unit composition and synthetic dives."""

from .action_units import compose_action_unit, compose_action_units, grid_shape, pool_descriptor
from .geometry import DegenerateAngleError, angles_from_joints, bbox_from_joints, joint_angle
from .io import (
    Corpus,
    CorpusError,
    Video,
    load_corpus,
    load_frames,
    load_pose_sequence,
    save_frames,
    save_pose_sequence,
    write_corpus,
)
from .synth import DiveSample, S_MAX, corpus_metadata, sample_dive_params, synth_corpus, synth_dive
from .types import (
    ANGLE_NAMES,
    JOINT_NAMES,
    PHASE_NAMES,
    ROI_JOINTS,
    ActionUnitImage,
    DiveParams,
    PoseFrame,
    PoseSequence,
    PoseValidationError,
    PoseWarning,
    VideoItem,
)

__all__ = [
    "ANGLE_NAMES", "ActionUnitImage", "Corpus", "CorpusError", "DegenerateAngleError", "DiveParams",
    "DiveSample", "JOINT_NAMES", "PHASE_NAMES", "PoseFrame", "PoseSequence", "PoseValidationError",
    "PoseWarning", "ROI_JOINTS", "S_MAX", "Video", "VideoItem", "angles_from_joints",
    "bbox_from_joints", "compose_action_unit", "compose_action_units", "corpus_metadata",
    "grid_shape", "joint_angle", "load_corpus", "load_frames", "load_pose_sequence",
    "pool_descriptor", "sample_dive_params", "save_frames", "save_pose_sequence", "synth_corpus",
    "synth_dive", "write_corpus",
]
