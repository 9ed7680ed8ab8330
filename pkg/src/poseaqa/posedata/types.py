from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

JOINT_NAMES = (
    "left_wrist", "left_elbow", "left_shoulder", "left_hip", "left_knee", "left_ankle",
    "right_wrist", "right_elbow", "right_shoulder", "right_hip", "right_knee", "right_ankle",
)
JOINT_INDEX = {name: i for i, name in enumerate(JOINT_NAMES)}

# (a, b, c) joint triples; the angle is measured at b
ANGLE_TRIPLES = (
    (JOINT_INDEX["left_shoulder"], JOINT_INDEX["left_hip"], JOINT_INDEX["left_knee"]),
    (JOINT_INDEX["right_shoulder"], JOINT_INDEX["right_hip"], JOINT_INDEX["right_knee"]),
    (JOINT_INDEX["left_hip"], JOINT_INDEX["left_knee"], JOINT_INDEX["left_ankle"]),
    (JOINT_INDEX["right_hip"], JOINT_INDEX["right_knee"], JOINT_INDEX["right_ankle"]),
)
ANGLE_NAMES = ("left_hip", "right_hip", "left_knee", "right_knee")

# shoulder, hip, knee, ankle on both sides
ROI_JOINTS = tuple(JOINT_INDEX[f"{side}_{part}"]
                   for side in ("left", "right") for part in ("shoulder", "hip", "knee", "ankle"))

PHASE_NAMES = ("take_off", "turning", "entry")


class PoseValidationError(ValueError):
    pass


class PoseWarning(UserWarning):
    pass


@dataclass
class PoseFrame:
    joints: np.ndarray  # (J, 2) normalized x, y
    angles: np.ndarray  # (U,) radians
    bbox: np.ndarray  # (x, y, w, h) normalized

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float64)
        self.angles = np.asarray(self.angles, dtype=np.float64)
        self.bbox = np.asarray(self.bbox, dtype=np.float64)

    @property
    def aspect_ratio(self):
        return self.bbox[3] / self.bbox[2]

    def validate(self, J=12, U=4):
        if self.joints.shape != (J, 2):
            raise PoseValidationError(f"joints: expected {J} (x, y) pairs, got shape {self.joints.shape}")
        if self.angles.shape != (U,):
            raise PoseValidationError(f"angles: expected {U} values, got shape {self.angles.shape}")
        if self.bbox.shape != (4,):
            raise PoseValidationError(f"bbox: expected 4 values, got shape {self.bbox.shape}")
        if not (np.all(np.isfinite(self.joints)) and np.all(np.isfinite(self.angles))
                and np.all(np.isfinite(self.bbox))):
            raise PoseValidationError("non-finite value in frame")
        if np.any(self.joints < 0) or np.any(self.joints > 1):
            raise PoseValidationError("joints: coordinates must lie in [0, 1]")
        if np.any(self.angles < 0) or np.any(self.angles > np.pi):
            raise PoseValidationError("angles: values must lie in [0, pi]")
        if self.bbox[2] <= 0 or self.bbox[3] <= 0:
            raise PoseValidationError(f"bbox: width and height must be positive, got {self.bbox[2:]}")


@dataclass
class PoseSequence:
    """Pose track stored as stacked arrays; iterate for PoseFrame views."""

    joints: np.ndarray  # (T, J, 2)
    angles: np.ndarray  # (T, U)
    bbox: np.ndarray  # (T, 4)

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float64)
        self.angles = np.asarray(self.angles, dtype=np.float64)
        self.bbox = np.asarray(self.bbox, dtype=np.float64)
        T = len(self.joints)
        if self.joints.ndim != 3 or self.angles.shape[0] != T or self.bbox.shape != (T, 4):
            raise PoseValidationError(
                f"inconsistent sequence arrays: joints {self.joints.shape}, angles "
                f"{self.angles.shape}, bbox {self.bbox.shape}")

    @classmethod
    def from_frames(cls, frames):
        frames = list(frames)
        if not frames:
            raise PoseValidationError("empty pose sequence")
        J, U = frames[0].joints.shape[0], frames[0].angles.shape[0]
        for i, f in enumerate(frames):
            if f.joints.shape[0] != J or f.angles.shape[0] != U:
                raise PoseValidationError(f"frame {i}: joint/angle counts differ from frame 0")
        return cls(np.stack([f.joints for f in frames]), np.stack([f.angles for f in frames]),
                   np.stack([f.bbox for f in frames]))

    def __len__(self):
        return len(self.joints)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return PoseSequence(self.joints[i], self.angles[i], self.bbox[i])
        return PoseFrame(self.joints[i], self.angles[i], self.bbox[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def frames(self):
        return list(self)

    @property
    def num_joints(self):
        return self.joints.shape[1]

    @property
    def num_angles(self):
        return self.angles.shape[1]

    @property
    def aspect_ratio(self):
        return self.bbox[:, 3] / self.bbox[:, 2]

    def pose_vectors(self):
        """(T, 2J + U + 1): joint coordinates, angles, aspect ratio."""
        T = len(self)
        return np.concatenate([self.joints.reshape(T, -1), self.angles, self.aspect_ratio[:, None]],
                              axis=1)


@dataclass
class ActionUnitImage:
    pixels: np.ndarray  # (rows*P, cols*P)
    Y: int
    patch_resolution: int

    @property
    def grid(self):
        cols = int(np.ceil(np.sqrt(self.Y)))
        return int(np.ceil(self.Y / cols)), cols

    def patch(self, i):
        rows, cols = self.grid
        P = self.patch_resolution
        r, c = divmod(i, cols)
        return self.pixels[r * P:(r + 1) * P, c * P:(c + 1) * P]


@dataclass
class DiveParams:
    """Controls for one synthetic dive.

    ``angle_deviation`` is (3 phases, U angles) of extra flexion in radians;
    ``wobble`` is the amplitude of the oscillating hip error during turning.
    """

    takeoff_frames: int = 12
    turning_frames: int = 22
    entry_frames: int = 8
    condition_frames: int = 12
    somersaults: int = 1
    angle_deviation: np.ndarray = field(default_factory=lambda: np.zeros((3, 4)))
    wobble: float = 0.0
    splash: float = 0.0
    judge_noise: float = 0.0
    seed: int = 0
    image_size: int = 64

    def __post_init__(self):
        self.angle_deviation = np.asarray(self.angle_deviation, dtype=np.float64)
        for name in ("takeoff_frames", "turning_frames", "entry_frames", "condition_frames"):
            if int(getattr(self, name)) < 4:
                raise ValueError(f"{name} must be at least 4, got {getattr(self, name)}")
        if self.splash < 0:
            raise ValueError(f"splash intensity must be non-negative, got {self.splash}")
        if self.angle_deviation.shape != (3, 4) or np.any(self.angle_deviation < 0):
            raise ValueError("angle_deviation must be a non-negative (3, 4) array")
        if self.angle_deviation.max(initial=0) + self.wobble > 0.9:
            raise ValueError("angle deviation plus wobble must stay below 0.9 rad")
        if self.wobble < 0 or self.judge_noise < 0 or self.somersaults < 0:
            raise ValueError("wobble, judge_noise and somersaults must be non-negative")


@dataclass
class VideoItem:
    id: str
    difficulty: float
    score: float
    gt_keyframes: Optional[list]
    pose_path: str
    frames_path: str
    num_frames: int = 0
    split: str = "train"
    truth: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "id": self.id, "difficulty": self.difficulty, "score": self.score,
            "gt_keyframes": None if self.gt_keyframes is None else [int(k) for k in self.gt_keyframes],
            "pose_path": self.pose_path, "frames_path": self.frames_path,
            "num_frames": self.num_frames, "split": self.split, "truth": self.truth,
        }

    @classmethod
    def from_json(cls, d):
        return cls(d["id"], float(d["difficulty"]), float(d["score"]), d.get("gt_keyframes"),
                   d["pose_path"], d["frames_path"], int(d.get("num_frames", 0)),
                   d.get("split", "train"), d.get("truth", {}))
