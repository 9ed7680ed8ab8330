"""Motion and condition parsers: dynamic and static features per aligned sub-phase.

All extractors take (..., M, C) inputs and return (..., d); leading axes are
batch (sub-phases, videos).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcore import LSTM, MLP, Conv1d, Linear, Module, Tensor, TransformerBlock
from .diffcore import tensor as tn


def _finite_input(x, who):
    x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
    if not np.all(np.isfinite(x.data)):
        raise ValueError(f"{who}: non-finite input")
    return x


class PurePoseExtractor(Module):
    """Input MLP, LSTM, Nystrom transformer block(s); the last token is the feature."""

    def __init__(self, in_dim, d, rng, landmarks=8, heads=1, depth=1, name="pfp"):
        self.input = MLP([in_dim, d, d], rng, f"{name}.input")
        self.lstm = LSTM(d, d, rng, f"{name}.lstm")
        self.blocks = [TransformerBlock(d, rng, heads, landmarks, name=f"{name}.block{i}")
                       for i in range(depth)]

    def forward(self, x):
        h = self.lstm(self.input(_finite_input(x, "pure-pose extractor")))
        for block in self.blocks:
            h = block(h)
        return h[..., -1, :]


class StaticExtractor(Module):
    """Per-frame MLP followed by a temporal mean: order-free by construction."""

    def __init__(self, in_dim, d, rng, name="static"):
        self.mlp = MLP([in_dim, d, d], rng, f"{name}.mlp")

    def forward(self, x):
        return self.mlp(_finite_input(x, "static extractor")).mean(axis=-2)


class DynamicVisualExtractor(Module):
    """Projection, residual temporal convolutions, attention pooling over time."""

    def __init__(self, in_dim, d, rng, kernel=3, layers=2, name="dyn"):
        self.proj = Linear(in_dim, d, rng, f"{name}.proj")
        self.convs = [Conv1d(d, d, kernel, rng, f"{name}.conv{i}") for i in range(layers)]
        self.score = Linear(d, 1, rng, f"{name}.pool")

    def forward(self, x):
        h = self.proj(_finite_input(x, "visual extractor"))
        for conv in self.convs:
            h = h + tn.gelu(conv(h))
        w = tn.softmax(self.score(h), axis=-2)  # (..., M, 1) weights over time
        return (w * h).sum(axis=-2)


class VisualExtractor(Module):
    """Dynamic and static branches over pooled action-unit descriptors."""

    def __init__(self, in_dim, d, rng, name="app"):
        self.in_dim = in_dim
        self.dynamic = DynamicVisualExtractor(in_dim, d, rng, name=f"{name}.dyn")
        self.static = StaticExtractor(in_dim, d, rng, name=f"{name}.static")

    def forward(self, x):
        x = _finite_input(x, "visual extractor")
        if x.shape[-1] != self.in_dim:
            raise ValueError(f"visual extractor: expected descriptors of size {self.in_dim}, "
                             f"got shape {x.shape}")
        return self.dynamic(x), self.static(x)


def pure_pose_features(extractor, pose_slice):
    return extractor(pose_slice)


def static_pose_features(mlp, pose_slice):
    return mlp(pose_slice)


def appearance_features(extractor, au_slice):
    return extractor(au_slice)


def condition_features(extractor, au_slice):
    return extractor(au_slice)


@dataclass
class FeatureBundle:
    """Tensors: motion features (..., N, d), condition features (..., d)."""

    pose: Tensor
    static_pose: Tensor
    appearance: Tensor
    static_appearance: Tensor
    condition: Tensor
    static_condition: Tensor

    KINDS = ("pose", "static_pose", "appearance", "static_appearance", "condition", "static_condition")

    def to_json(self):
        return {k: getattr(self, k).data.tolist() for k in self.KINDS}

    def select(self, i):
        """Bundle of the i-th entry along the leading (video) axis."""
        return FeatureBundle(*(getattr(self, k)[i] for k in self.KINDS))


class Parsers(Module):
    """Every feature extractor of the motion and condition parsers."""

    def __init__(self, pose_dim, desc_dim, d, rng, landmarks=8, heads=1, depth=1):
        self.pose = PurePoseExtractor(pose_dim, d, rng, landmarks, heads, depth)
        self.static_pose = StaticExtractor(pose_dim, d, rng, name="spose")
        self.appearance = VisualExtractor(desc_dim, d, rng, name="app")
        self.condition = VisualExtractor(desc_dim, d, rng, name="cond")

    def backbone_parameters(self):
        """Stand-ins for pretrained video backbones (the dynamic visual branches)."""
        return self.appearance.dynamic.parameters() + self.condition.dynamic.parameters()

    def extract(self, motion_pose, motion_au, condition_au) -> FeatureBundle:
        app, sapp = self.appearance(motion_au)
        cond, scond = self.condition(condition_au)
        return FeatureBundle(self.pose(motion_pose), self.static_pose(motion_pose), app, sapp, cond, scond)
