"""Transition-probability segmentation: model, ordered keyframe decoding, loss and AIoU."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcore import MLP, Conv1d, Linear, Module, Tensor
from .diffcore import tensor as tn

PROB_CLAMP = 1e-7


@dataclass
class TransitionProbMatrix:
    probs: np.ndarray  # (T, H)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 2:
            raise ValueError(f"transition probabilities must be (T, H), got shape {self.probs.shape}")

    @property
    def T(self):
        return self.probs.shape[0]

    @property
    def H(self):
        return self.probs.shape[1]


@dataclass(frozen=True)
class KeyframeSet:
    transitions: tuple
    end_index: int

    def __post_init__(self):
        k = tuple(int(x) for x in self.transitions)
        object.__setattr__(self, "transitions", k)
        bounds = (0,) + k + (int(self.end_index),)
        if k and (k[0] < 1 or any(b <= a for a, b in zip(bounds[1:], bounds[2:]))):
            raise ValueError(f"keyframes must satisfy 1 <= k_1 < ... < k_H < T={self.end_index}, got {k}")

    @property
    def H(self):
        return len(self.transitions)

    def phases(self):
        """Intervals [start, end) delimited by 0, the transitions and the end index."""
        b = (0,) + self.transitions + (self.end_index,)
        return list(zip(b[:-1], b[1:]))

    def to_json(self):
        return {"keyframes": list(self.transitions), "end_index": self.end_index}


class SegmenterModel(Module):
    """Per-frame embedding, residual temporal convolutions, H sigmoid heads."""

    def __init__(self, in_dim, hidden, heads, rng, kernel=5, layers=3, name="seg"):
        self.in_dim, self.heads = in_dim, heads
        self.embed = MLP([in_dim, hidden, hidden], rng, f"{name}.embed")
        self.convs = [Conv1d(hidden, hidden, kernel, rng, f"{name}.conv{i}") for i in range(layers)]
        self.head = Linear(hidden, heads, rng, f"{name}.head")

    def forward(self, x):
        """(T, in_dim) frame features -> (T, H) probabilities as a Tensor."""
        h = self.embed(x)
        for conv in self.convs:
            h = h + tn.gelu(conv(h))
        return tn.sigmoid(self.head(h))


def frame_features(pose_vectors, descriptors):
    pose_vectors = np.asarray(pose_vectors, dtype=np.float64)
    descriptors = np.asarray(descriptors, dtype=np.float64)
    if len(pose_vectors) != len(descriptors):
        raise ValueError(f"pose sequence has {len(pose_vectors)} frames but action-unit sequence has "
                         f"{len(descriptors)}")
    return np.concatenate([pose_vectors, descriptors.reshape(len(descriptors), -1)], axis=1)


def predict_transition_probs(model: SegmenterModel, pose_vectors, descriptors) -> TransitionProbMatrix:
    x = frame_features(pose_vectors, descriptors)
    if len(x) < model.heads + 2:
        raise ValueError(f"sequence of {len(x)} frames is too short for {model.heads} transitions")
    return TransitionProbMatrix(model(Tensor(x)).data)


def decode_keyframes(probs, min_gap=1) -> KeyframeSet:
    """Ordered keyframes maximizing the summed log-probability.

    Each phase before the last transition is at least ``min_gap`` frames
    long (k_1 >= min_gap, k_{h+1} - k_h >= min_gap) and k_H <= T - 1.  Ties
    go to the lexicographically smallest tuple.
    """
    P = probs.probs if isinstance(probs, TransitionProbMatrix) else np.asarray(probs, dtype=np.float64)
    T, H = P.shape
    g = max(int(min_gap), 1)
    if H == 0:
        return KeyframeSet((), T)
    if g * H > T - 1:
        raise ValueError(f"cannot place {H} transitions with gap {g} in {T} frames")
    logp = np.log(np.clip(P, PROB_CLAMP, 1.0))
    # suffix[h, t]: best score of transitions h..H-1 with k_h = t
    suffix = np.full((H, T), -np.inf)
    lo = [g * (h + 1) for h in range(H)]
    hi = [T - 1 - g * (H - 1 - h) for h in range(H)]
    suffix[H - 1, lo[H - 1]:hi[H - 1] + 1] = logp[lo[H - 1]:hi[H - 1] + 1, H - 1]
    for h in range(H - 2, -1, -1):
        # best continuation from any t' >= t + g
        nxt = suffix[h + 1]
        tail = np.maximum.accumulate(nxt[::-1])[::-1]
        for t in range(lo[h], hi[h] + 1):
            suffix[h, t] = logp[t, h] + tail[t + g]
    ks = []
    start = lo[0]
    for h in range(H):
        window = suffix[h, start:hi[h] + 1]
        t = start + int(np.argmax(window))  # argmax returns the first maximum
        ks.append(t)
        start = t + g
    return KeyframeSet(tuple(ks), T)


def asm_loss(probs, gt: KeyframeSet):
    """Summed binary cross-entropy against one-hot transition targets.

    Returns a Tensor when ``probs`` is a Tensor (for training), else a float.
    """
    is_tensor = isinstance(probs, Tensor)
    p = probs if is_tensor else Tensor(probs.probs if isinstance(probs, TransitionProbMatrix) else probs)
    T, H = p.shape
    if gt.H != H:
        raise ValueError(f"{H} probability columns but {gt.H} ground-truth transitions")
    target = np.zeros((T, H))
    for h, k in enumerate(gt.transitions):
        if not 0 <= k < T:
            raise ValueError(f"ground-truth transition {k} outside [0, {T})")
        target[k, h] = 1.0
    pc = tn.clip(p, PROB_CLAMP, 1 - PROB_CLAMP)
    loss = -(tn.log(pc) * target + tn.log(1.0 - pc) * (1.0 - target)).sum()
    return loss if is_tensor else float(loss.data)


def _interval_iou(a, b):
    inter = max(0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union > 0 else 1.0


@dataclass
class AIoUResult:
    mean_iou: float
    passed: dict  # threshold -> bool


def aiou(pred: KeyframeSet, gt: KeyframeSet, thresholds=(0.5, 0.75)) -> AIoUResult:
    if pred.H != gt.H or pred.end_index != gt.end_index:
        raise ValueError(f"keyframe sets disagree: H {pred.H} vs {gt.H}, T {pred.end_index} vs {gt.end_index}")
    ious = [_interval_iou(a, b) for a, b in zip(pred.phases(), gt.phases())]
    m = float(np.mean(ious))
    return AIoUResult(m, {float(t): m >= t for t in thresholds})


def corpus_aiou(mean_ious, thresholds=(0.5, 0.75)):
    """Fraction of videos whose mean phase IoU reaches each threshold."""
    m = np.asarray(mean_ious, dtype=np.float64)
    return {float(t): float(np.mean(m >= t)) for t in thresholds}
