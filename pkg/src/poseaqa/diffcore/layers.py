"""Learned layers built on :mod:`poseaqa.diffcore.tensor`.

All sequence layers take ``(..., T, C)`` inputs; leading axes are batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as tn
from .tensor import Parameter, ShapeError, Tensor

LAYER_KINDS = ("linear", "mlp", "lstm", "conv1d", "attention_exact", "attention_nystrom",
               "layer_norm")


class Module:
    """Base class: collects Parameters from attributes, lists and submodules."""

    def parameters(self):
        out, seen = [], set()
        self._collect(out, seen)
        return out

    def _collect(self, out, seen):
        for value in vars(self).values():
            _collect_value(value, out, seen)

    def named_parameters(self):
        return {p.name: p for p in self.parameters()}

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def __call__(self, x):
        return self.forward(x)


def _collect_value(value, out, seen):
    if isinstance(value, Parameter):
        if id(value) not in seen:
            seen.add(id(value))
            out.append(value)
    elif isinstance(value, Module):
        value._collect(out, seen)
    elif isinstance(value, (list, tuple)):
        for v in value:
            _collect_value(v, out, seen)
    elif isinstance(value, dict):
        for v in value.values():
            _collect_value(v, out, seen)


def _glorot(rng, fan_in, fan_out, shape=None):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


def _check_last(x, expected, who):
    if x.ndim < 1 or x.shape[-1] != expected:
        raise ShapeError(f"{who}: expected input with last dim {expected}, got shape {x.shape}")


class Linear(Module):
    def __init__(self, in_dim, out_dim, rng, name="linear", bias=True):
        self.in_dim, self.out_dim = in_dim, out_dim
        self.weight = Parameter(_glorot(rng, in_dim, out_dim), f"{name}.weight")
        self.bias = Parameter(np.zeros(out_dim), f"{name}.bias") if bias else None

    def forward(self, x):
        x = tn.as_tensor(x)
        _check_last(x, self.in_dim, "linear")
        y = x @ self.weight
        return y + self.bias if self.bias is not None else y


_ACTIVATIONS = {"relu": tn.relu, "tanh": tn.tanh, "gelu": tn.gelu}


class MLP(Module):
    """Stack of Linear layers with an activation between (not after) them."""

    def __init__(self, dims, rng, name="mlp", activation="gelu", final_activation=False):
        if len(dims) < 2:
            raise ValueError("MLP needs at least input and output dims")
        self.dims = list(dims)
        self.layers = [Linear(a, b, rng, f"{name}.{i}") for i, (a, b) in enumerate(zip(dims, dims[1:]))]
        self.act = _ACTIVATIONS[activation]
        self.final_activation = final_activation

    def forward(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1 or self.final_activation:
                x = self.act(x)
        return x


class LayerNorm(Module):
    def __init__(self, dim, name="ln", eps=1e-5, affine=True):
        self.dim, self.eps = dim, eps
        self.gain = Parameter(np.ones(dim), f"{name}.gain") if affine else None
        self.shift = Parameter(np.zeros(dim), f"{name}.shift") if affine else None

    def normalize(self, x):
        x = tn.as_tensor(x)
        _check_last(x, self.dim, "layer_norm")
        centered = x - x.mean(axis=-1, keepdims=True)
        var = (centered * centered).mean(axis=-1, keepdims=True)
        return centered / tn.sqrt(var + self.eps)

    def forward(self, x):
        y = self.normalize(x)
        if self.gain is None:
            return y
        return y * self.gain + self.shift


class LSTM(Module):
    """Single-layer LSTM, zero initial state, gate order (input, forget, cell, output)."""

    def __init__(self, in_dim, hidden, rng, name="lstm"):
        self.in_dim, self.hidden = in_dim, hidden
        self.w_ih = Parameter(_glorot(rng, in_dim, 4 * hidden), f"{name}.w_ih")
        w_hh = np.concatenate([_orthogonal(rng, hidden) for _ in range(4)], axis=1)
        self.w_hh = Parameter(w_hh, f"{name}.w_hh")
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0
        self.bias = Parameter(b, f"{name}.bias")

    def forward(self, x):
        """``x``: (..., T, in_dim) -> hidden states (..., T, hidden)."""
        x = tn.as_tensor(x)
        _check_last(x, self.in_dim, "lstm")
        if x.ndim < 2:
            raise ShapeError(f"lstm: expected (..., T, {self.in_dim}), got shape {x.shape}")
        H = self.hidden
        gates_x = x @ self.w_ih + self.bias
        T = x.shape[-2]
        batch = x.shape[:-2]
        h = Tensor(np.zeros(batch + (H,)))
        c = Tensor(np.zeros(batch + (H,)))
        states = []
        for t in range(T):
            z = gates_x[..., t, :] + h @ self.w_hh
            i = tn.sigmoid(z[..., :H])
            f = tn.sigmoid(z[..., H:2 * H])
            g = tn.tanh(z[..., 2 * H:3 * H])
            o = tn.sigmoid(z[..., 3 * H:])
            c = f * c + i * g
            h = o * tn.tanh(c)
            states.append(h)
        return tn.stack(states, axis=-2)


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


class Conv1d(Module):
    """Temporal convolution with 'same' zero padding over (..., T, C_in)."""

    def __init__(self, in_ch, out_ch, kernel, rng, name="conv1d"):
        if kernel % 2 != 1:
            raise ValueError("same padding needs an odd kernel")
        self.in_ch, self.out_ch, self.kernel = in_ch, out_ch, kernel
        self.weight = Parameter(_glorot(rng, kernel * in_ch, out_ch), f"{name}.weight")
        self.bias = Parameter(np.zeros(out_ch), f"{name}.bias")

    def forward(self, x):
        x = tn.as_tensor(x)
        _check_last(x, self.in_ch, "conv1d")
        if x.ndim < 2:
            raise ShapeError(f"conv1d: expected (..., T, {self.in_ch}), got shape {x.shape}")
        half = self.kernel // 2
        T = x.shape[-2]
        padded = tn.pad_time(x, half, half)
        cols = tn.concat([padded[..., j:j + T, :] for j in range(self.kernel)], axis=-1)
        return cols @ self.weight + self.bias


# ----------------------------------------------------------------------------
# attention


def exact_attention(q, k, v):
    """softmax(q k^T / sqrt(d)) v over (..., T, d)."""
    q, k, v = tn.as_tensor(q), tn.as_tensor(k), tn.as_tensor(v)
    scale = 1.0 / np.sqrt(q.shape[-1])
    return tn.softmax((q @ k.T) * scale, axis=-1) @ v


def landmark_matrix(T, m):
    """(m, T) averaging matrix over m contiguous, near-equal segments."""
    if not 1 <= m <= T:
        raise ValueError(f"landmark count must satisfy 1 <= m <= T, got m={m}, T={T}")
    A = np.zeros((m, T))
    for j, idx in enumerate(np.array_split(np.arange(T), m)):
        A[j, idx] = 1.0 / len(idx)
    return A


def nystrom_attention(q, k, v, m, rcond=1e-8):
    """Nystrom approximation of softmax attention with m segment-mean landmarks."""
    q, k, v = tn.as_tensor(q), tn.as_tensor(k), tn.as_tensor(v)
    if q.shape != k.shape or q.shape[:-1] != v.shape[:-1]:
        raise ShapeError(f"nystrom_attention: q {q.shape}, k {k.shape}, v {v.shape} disagree")
    T = q.shape[-2]
    if not 1 <= m <= T:
        raise ValueError(f"landmark count must satisfy 1 <= m <= T, got m={m}, T={T}")
    A = Tensor(landmark_matrix(T, m))
    q_land = A @ q
    k_land = A @ k
    scale = 1.0 / np.sqrt(q.shape[-1])
    kernel_1 = tn.softmax((q @ k_land.T) * scale, axis=-1)
    kernel_2 = tn.softmax((q_land @ k_land.T) * scale, axis=-1)
    kernel_3 = tn.softmax((q_land @ k.T) * scale, axis=-1)
    return (kernel_1 @ tn.pinv(kernel_2, rcond)) @ (kernel_3 @ v)


class Attention(Module):
    """Self-attention with q/k/v/output projections; exact or Nystrom kernel."""

    def __init__(self, dim, rng, heads=1, landmarks=None, name="attn"):
        if dim % heads:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        self.dim, self.heads, self.landmarks = dim, heads, landmarks
        self.q = Linear(dim, dim, rng, f"{name}.q")
        # a key bias shifts every logit in a row equally, so softmax ignores it
        self.k = Linear(dim, dim, rng, f"{name}.k", bias=False)
        self.v = Linear(dim, dim, rng, f"{name}.v")
        self.out = Linear(dim, dim, rng, f"{name}.out")

    @property
    def kind(self):
        return "attention_exact" if self.landmarks is None else "attention_nystrom"

    def _split(self, x):
        if self.heads == 1:
            return x
        *lead, T, d = x.shape
        x = x.reshape(*lead, T, self.heads, d // self.heads)
        return x.swapaxes(-2, -3)

    def _merge(self, x):
        if self.heads == 1:
            return x
        x = x.swapaxes(-2, -3)
        *lead, T, h, dh = x.shape
        return x.reshape(*lead, T, h * dh)

    def forward(self, x):
        x = tn.as_tensor(x)
        _check_last(x, self.dim, self.kind)
        q, k, v = (self._split(proj(x)) for proj in (self.q, self.k, self.v))
        if self.landmarks is None:
            mixed = exact_attention(q, k, v)
        else:
            mixed = nystrom_attention(q, k, v, self.landmarks)
        return self.out(self._merge(mixed))


class TransformerBlock(Module):
    """Pre-norm encoder block: x + attn(ln(x)), then x + ff(ln(x))."""

    def __init__(self, dim, rng, heads=1, landmarks=None, ff_mult=2, name="block"):
        self.ln1 = LayerNorm(dim, f"{name}.ln1")
        self.attn = Attention(dim, rng, heads, landmarks, f"{name}.attn")
        self.ln2 = LayerNorm(dim, f"{name}.ln2")
        self.ff = MLP([dim, ff_mult * dim, dim], rng, f"{name}.ff")

    def forward(self, x):
        x = x + self.attn(self.ln1(x))
        return x + self.ff(self.ln2(x))


# ----------------------------------------------------------------------------
# declarative construction


@dataclass
class LayerSpec:
    kind: str
    dims: tuple = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if any(int(d) <= 0 for d in self.dims):
            raise ValueError(f"{self.kind}: dimensions must be positive, got {self.dims}")


def build_layer(spec: LayerSpec, rng, name=None):
    name = name or spec.kind
    d = spec.dims
    p = spec.params
    if spec.kind == "linear":
        return Linear(d[0], d[1], rng, name)
    if spec.kind == "mlp":
        return MLP(d, rng, name, p.get("activation", "gelu"))
    if spec.kind == "lstm":
        return LSTM(d[0], d[1], rng, name)
    if spec.kind == "conv1d":
        return Conv1d(d[0], d[1], p.get("kernel", 5), rng, name)
    if spec.kind == "attention_exact":
        return Attention(d[0], rng, p.get("heads", 1), None, name)
    if spec.kind == "attention_nystrom":
        return Attention(d[0], rng, p.get("heads", 1), p.get("landmarks", 8), name)
    return LayerNorm(d[0], name, p.get("eps", 1e-5))


def forward(layer, x):
    return layer(x)
