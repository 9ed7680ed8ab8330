"""Motion/condition split, sub-phase division and fixed-length temporal alignment.

Alignment resamples every sub-phase to a canonical length, so each video is
aligned independently and a pair is just two aligned videos side by side.
Action-unit frames are resampled by nearest neighbour; since that only picks
whole frames, resampling pooled descriptors equals pooling resampled images.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .segmenter import KeyframeSet


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class SubPhase:
    index: int  # 1-based
    start: int
    end: int

    @property
    def length(self):
        return self.end - self.start


def split_motion_condition(T, K: KeyframeSet):
    """Motion [0, k_N) and condition [k_N, T) where k_N is the last transition."""
    if K.H == 0:
        raise AlignmentError("need at least the motion/condition transition")
    if K.end_index != T:
        raise AlignmentError(f"keyframes end at {K.end_index} but the sequence has {T} frames")
    boundary = K.transitions[-1]
    if boundary >= T:
        raise AlignmentError(f"empty condition range: boundary {boundary} with T={T}")
    return (0, boundary), (boundary, T)


def subdivide(motion, transitions, min_length=2):
    """Split ``motion`` = (start, end) at the within-motion transitions."""
    start, end = motion
    cuts = [start] + [int(k) for k in transitions] + [end]
    phases = []
    for i, (a, b) in enumerate(zip(cuts[:-1], cuts[1:]), start=1):
        if b - a < min_length:
            raise AlignmentError(f"sub-phase {i} spans [{a}, {b}), shorter than {min_length} frames")
        phases.append(SubPhase(i, a, b))
    return phases


def sample_times(length, M):
    """M uniformly spaced time points over [0, length-1], endpoints included."""
    if M < 2:
        raise ValueError(f"target length must be at least 2, got {M}")
    # j*(L-1)/(M-1) is exact at j=0, j=M-1, and everywhere when L == M
    return np.arange(M) * (length - 1) / (M - 1)


def resample(x, M, mode="linear"):
    """Resample (L, ...) along axis 0 to M points: linear or nearest."""
    x = np.asarray(x, dtype=np.float64)
    L = len(x)
    if L == 0:
        raise ValueError("cannot resample an empty slice")
    if L == 1:
        return np.repeat(x, M, axis=0)
    t = sample_times(L, M)
    if mode == "nearest":
        return x[np.minimum(np.floor(t + 0.5).astype(int), L - 1)]
    if mode != "linear":
        raise ValueError(f"unknown resampling mode {mode!r}")
    i0 = np.minimum(np.floor(t).astype(int), L - 2)
    frac = (t - i0).reshape((-1,) + (1,) * (x.ndim - 1))
    return x[i0] * (1 - frac) + x[i0 + 1] * frac


@dataclass
class AlignedVideo:
    motion_pose: np.ndarray  # (N, M, pose_dim)
    motion_au: np.ndarray  # (N, M, desc_dim)
    condition_au: np.ndarray  # (M_c, desc_dim)
    phases: list
    condition: tuple


def align_video(pose_vectors, descriptors, K: KeyframeSet, M=16, M_c=24) -> AlignedVideo:
    T = len(pose_vectors)
    if len(descriptors) != T:
        raise AlignmentError(f"{T} pose frames but {len(descriptors)} action-unit frames")
    motion, condition = split_motion_condition(T, K)
    phases = subdivide(motion, K.transitions[:-1])
    pose = np.stack([resample(pose_vectors[p.start:p.end], M) for p in phases])
    au = np.stack([resample(descriptors[p.start:p.end], M, "nearest") for p in phases])
    cond = resample(descriptors[condition[0]:condition[1]], M_c, "nearest")
    return AlignedVideo(pose, au, cond, phases, condition)


@dataclass
class AlignedPair:
    index: Optional[int]  # 1-based sub-phase, None for the condition part
    query_pose: Optional[np.ndarray]
    reference_pose: Optional[np.ndarray]
    query_au: np.ndarray
    reference_au: np.ndarray


def pair_up(q: AlignedVideo, e: AlignedVideo):
    if len(q.phases) != len(e.phases):
        raise AlignmentError(f"query has {len(q.phases)} sub-phases, reference has {len(e.phases)}")
    pairs = [AlignedPair(i + 1, q.motion_pose[i], e.motion_pose[i], q.motion_au[i], e.motion_au[i])
             for i in range(len(q.phases))]
    pairs.append(AlignedPair(None, None, None, q.condition_au, e.condition_au))
    return pairs


def align_pair(query, reference, K_Q, K_E, M=16, M_c=24):
    """``query``/``reference`` are (pose_vectors, descriptors) tuples."""
    if K_Q.H != K_E.H:
        raise AlignmentError(f"query segmented into {K_Q.H} transitions, reference into {K_E.H}")
    return pair_up(align_video(*query, K_Q, M, M_c), align_video(*reference, K_E, M, M_c))
