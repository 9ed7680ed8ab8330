"""Feature differences, antisymmetric score regressors and weighted fusion.

The fusion helpers accept numpy arrays or Tensors, so the same code computes
reported breakdowns and training losses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffcore import MLP, Module, Tensor


class WeightError(ValueError):
    pass


@dataclass(frozen=True)
class ScoreWeights:
    delta: tuple = (0.30, 0.55, 0.15)
    alpha: float = 0.7
    beta: float = 0.3
    dynamic_static_ratio: float = 0.5  # fixed 5:5 split

    def __post_init__(self):
        delta = tuple(float(x) for x in self.delta)
        object.__setattr__(self, "delta", delta)
        if not delta or any(x <= 0 for x in delta):
            raise WeightError(f"delta weights must be positive, got {delta}")
        if abs(sum(delta) - 1.0) > 1e-9:
            raise WeightError(f"delta weights must sum to 1, got sum {sum(delta)!r}")
        if self.alpha < 0 or self.beta < 0:
            raise WeightError(f"alpha and beta must be non-negative, got {self.alpha}, {self.beta}")
        if abs(self.alpha + self.beta - 1.0) > 1e-9:
            raise WeightError(f"alpha + beta must equal 1, got {self.alpha + self.beta!r}")
        if self.dynamic_static_ratio != 0.5:
            raise WeightError("dynamic/static ratio is fixed at 0.5")

    @property
    def N(self):
        return len(self.delta)


def feature_diff(f_q, f_e):
    if tuple(f_q.shape) != tuple(f_e.shape):
        raise ValueError(f"feature shapes differ: {tuple(f_q.shape)} vs {tuple(f_e.shape)}")
    return f_q - f_e


class SubscoreRegressor(Module):
    """SD = scale * (g(D) - g(-D)) / 2 with g a two-layer MLP; odd in D by construction."""

    def __init__(self, d, hidden, rng, scale=1.0, name="reg"):
        self.g = MLP([d, hidden, 1], rng, name)
        self.scale = float(scale)

    def forward(self, D):
        D = D if isinstance(D, Tensor) else Tensor(np.asarray(D, dtype=np.float64))
        # two separate same-shape calls: g(D) under a swap is then bitwise g(-D)
        plus = self.g(D)
        minus = self.g(-D)
        return ((plus - minus) * (0.5 * self.scale)).reshape(*D.shape[:-1])


def regress_subscore(regressor, D):
    return regressor(D)


def _weighted_sum(x, w):
    if isinstance(x, Tensor):
        return (x * np.asarray(w, dtype=np.float64)).sum(axis=-1)
    return np.sum(np.asarray(x, dtype=np.float64) * np.asarray(w, dtype=np.float64), axis=-1)


def fuse_branch(sd_dynamic, sd_static, delta, dynamic_weight=0.5):
    """dynamic_weight * sum(delta * SD_dyn) + (1 - dynamic_weight) * sum(delta * SD_stat).

    ``dynamic_weight`` is 0.5 in the full model; the ablations set it to 1
    (static branch removed) or 0 (dynamic branch removed), and the removed
    side may then be None.
    """
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(delta < 0) or abs(delta.sum() - 1.0) > 1e-9:
        raise WeightError(f"delta must be non-negative and sum to 1, got {delta.tolist()}")
    for name, sd in (("dynamic", sd_dynamic), ("static", sd_static)):
        if sd is not None and tuple(np.shape(sd.data if isinstance(sd, Tensor) else sd))[-1:] != delta.shape:
            raise ValueError(f"{name} score differences do not match {len(delta)} delta weights")
    out = 0.0
    if dynamic_weight != 0:
        out = _weighted_sum(sd_dynamic, delta) * dynamic_weight
    if dynamic_weight != 1:
        out = out + _weighted_sum(sd_static, delta) * (1.0 - dynamic_weight)
    return out


def fuse_total(sd_final_m, sd_final_c, alpha, beta):
    return sd_final_m * alpha + sd_final_c * beta


def predict_score(sd_total, x_e, score_range=(0.0, 100.0)):
    if x_e < 0:
        raise ValueError(f"reference score must be non-negative, got {x_e}")
    lo, hi = score_range
    return float(np.clip(x_e + sd_total, lo, hi))


def _f(x):
    return float(x.data) if isinstance(x, Tensor) else float(x)


def _fl(x):
    return [float(v) for v in (x.data if isinstance(x, Tensor) else np.asarray(x)).reshape(-1)]


@dataclass
class ScoreBreakdown:
    pose: list
    static_pose: list
    appearance: list
    static_appearance: list
    condition: float
    static_condition: float
    final_pose: float
    final_appearance: float
    final_motion: float
    final_condition: float
    total: float
    reference_score: float
    predicted: float  # clamped
    predicted_raw: float = field(default=float("nan"))  # before clamping

    def to_json(self):
        return dict(vars(self))

    @classmethod
    def from_json(cls, d):
        return cls(**d)


class ScoreHead(Module):
    """Six regressors (pose/appearance/condition x dynamic/static) plus fusion."""

    BRANCHES = ("pose", "static_pose", "appearance", "static_appearance", "condition", "static_condition")

    def __init__(self, d, hidden, rng, weights: ScoreWeights, scale=10.0, use_pure_pose=True,
                 use_static=True):
        self.weights = weights
        self.use_pure_pose, self.use_static = use_pure_pose, use_static
        self.regressors = {b: SubscoreRegressor(d, hidden, rng, scale, name=f"reg.{b}")
                           for b in self.BRANCHES}

    def _ratio(self, branch):
        if branch == "pose" and not self.use_pure_pose:
            return 0.0 if self.use_static else None
        return 0.5 if self.use_static else 1.0

    def subscores(self, fq, fe):
        """Per-branch SDs for query/reference FeatureBundles."""
        out = {}
        for b in self.BRANCHES:
            out[b] = self.regressors[b](feature_diff(getattr(fq, b), getattr(fe, b)))
        return out

    def fuse(self, sd):
        w = self.weights
        ratio_p = self._ratio("pose")
        if ratio_p is None:
            raise ValueError("removing both pose branches leaves nothing to score pose")
        ratio = self._ratio("appearance")
        final_p = fuse_branch(sd["pose"], sd["static_pose"], w.delta, ratio_p)
        final_a = fuse_branch(sd["appearance"], sd["static_appearance"], w.delta, ratio)
        final_m = final_a * 0.5 + final_p * 0.5
        final_c = sd["condition"] * ratio
        if ratio != 1:
            final_c = final_c + sd["static_condition"] * (1.0 - ratio)
        total = fuse_total(final_m, final_c, w.alpha, w.beta)
        return {"final_pose": final_p, "final_appearance": final_a, "final_motion": final_m,
                "final_condition": final_c, "total": total}

    def breakdown(self, sd, fused, x_e, score_range):
        raw = float(x_e) + _f(fused["total"])
        return ScoreBreakdown(
            pose=_fl(sd["pose"]), static_pose=_fl(sd["static_pose"]),
            appearance=_fl(sd["appearance"]), static_appearance=_fl(sd["static_appearance"]),
            condition=_f(sd["condition"]), static_condition=_f(sd["static_condition"]),
            final_pose=_f(fused["final_pose"]), final_appearance=_f(fused["final_appearance"]),
            final_motion=_f(fused["final_motion"]), final_condition=_f(fused["final_condition"]),
            total=_f(fused["total"]), reference_score=float(x_e),
            predicted=predict_score(_f(fused["total"]), x_e, score_range), predicted_raw=raw)
