"""Finite-difference checks over every layer kind and every feature extractor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcore import (LSTM, MLP, Attention, Conv1d, LayerNorm, Linear, Tensor, TransformerBlock,
                       grad_check)
from .parsers import PurePoseExtractor, StaticExtractor, VisualExtractor
from .scorer import SubscoreRegressor
from .segmenter import KeyframeSet, SegmenterModel, asm_loss

# tolerance per component; pseudo-inverse based and deep extractors get 1e-3
TOLERANCES = {
    "linear": 1e-4, "mlp": 1e-4, "lstm": 1e-4, "conv1d": 1e-4, "layer_norm": 1e-4,
    "attention_exact": 1e-4, "attention_nystrom": 1e-3, "transformer_block": 1e-3,
    "pure_pose_extractor": 1e-3, "static_pose_extractor": 1e-4, "appearance_extractor": 1e-3,
    "condition_extractor": 1e-3, "score_regressor": 1e-4, "segmenter_asm_loss": 1e-4,
}


@dataclass
class SuiteResult:
    component: str
    seed: int
    tolerance: float
    worst: float
    passed: bool


def _projected(module, x, rng):
    """Scalar loss sum(module(x) * R) with a fixed random R."""
    x = Tensor(x)
    R = rng.normal(size=module(x).shape)
    return lambda: (module(x) * R).sum()


def smooth_sequence(rng, T, C, batch=None):
    """Random low-frequency trajectories, like pose channels over time.

    White-noise frames make the Nystrom landmark kernel nearly singular, and
    there central differences cannot resolve the pseudo-inverse's curvature.
    """
    shape = (T, C) if batch is None else (batch, T, C)
    t = np.linspace(0, 1, T)[:, None]
    freq = rng.uniform(0.5, 1.5, shape[:-2] + (1, C))
    phase = rng.uniform(0, 1, shape[:-2] + (1, C))
    return np.sin(2 * np.pi * (t * freq + phase))


def _cases(seed):
    rng = np.random.default_rng(seed)
    B = int(rng.integers(1, 3))
    C = int(rng.integers(2, 6))
    D = 2 * int(rng.integers(1, 4))
    T = int(rng.integers(3, 7))
    # attention widths nearer production; very narrow q/k give a near-singular landmark kernel
    A = 4 * int(rng.integers(2, 5))

    def x(*shape):
        return rng.normal(size=shape)

    yield "linear", _case(Linear(C, D, rng), x(B, C), rng)
    yield "mlp", _case(MLP([C, D, 3], rng), x(B, C), rng)
    yield "lstm", _case(LSTM(C, D, rng), x(B, 5, C), rng)
    yield "conv1d", _case(Conv1d(C, D, 3, rng), x(B, T, C), rng)
    yield "layer_norm", _case(_shifted_ln(D, rng), x(B, D), rng)
    yield "attention_exact", _case(Attention(D, rng), x(B, T, D), rng)
    smooth = smooth_sequence(rng, 8, A)
    yield "attention_nystrom", _case(Attention(A, rng, landmarks=8), smooth, rng)
    yield "transformer_block", _case(TransformerBlock(A, rng, landmarks=8), smooth, rng)
    yield "pure_pose_extractor", _case(PurePoseExtractor(C, A, rng, landmarks=4),
                                       smooth_sequence(rng, 8, C, B), rng)
    yield "static_pose_extractor", _case(StaticExtractor(C, D, rng), x(B, T, C), rng)
    app = VisualExtractor(C, D, rng)
    yield "appearance_extractor", _case(_Both(app), x(B, T, C), rng)
    cond = VisualExtractor(C, D, rng)
    yield "condition_extractor", _case(_Both(cond), x(T + 2, C), rng)
    yield "score_regressor", _case(SubscoreRegressor(D, 4, rng, scale=3.0), x(B, D), rng)
    seg = SegmenterModel(C, D, 3, rng)
    frames = x(12, C)
    ks = np.sort(rng.choice(np.arange(1, 12), size=3, replace=False))
    gt = KeyframeSet(tuple(int(k) for k in ks), 12)
    yield "segmenter_asm_loss", (lambda: asm_loss(seg(Tensor(frames)), gt), seg.parameters())


class _Both:
    """Sum of a visual extractor's dynamic and static outputs, so one check covers both."""

    def __init__(self, ext):
        self.ext = ext

    def __call__(self, x):
        dyn, stat = self.ext(x)
        return dyn + stat

    def parameters(self):
        return self.ext.parameters()


def _shifted_ln(D, rng):
    ln = LayerNorm(D)
    ln.gain.data[:] = rng.uniform(0.5, 1.5, D)
    ln.shift.data[:] = rng.normal(size=D)
    return ln


def _case(module, x, rng):
    return _projected(module, x, rng), module.parameters()


def run_suite(seed, components=None, max_entries=10):
    out = []
    for name, (fn, params) in _cases(seed):
        if components is not None and name not in components:
            continue
        rep = grad_check(fn, params, tolerance=TOLERANCES[name], max_entries=max_entries,
                         rng=np.random.default_rng(seed))
        out.append(SuiteResult(name, seed, TOLERANCES[name], rep.worst, rep.passed))
    return out
