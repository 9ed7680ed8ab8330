"""Nesterov-accelerated Adam.

Update for step t (1-based), gradient g::

    m <- b1*m + (1-b1)*g
    v <- b2*v + (1-b2)*g^2
    m_hat = b1*m / (1 - b1^(t+1)) + (1-b1)*g / (1 - b1^t)
    v_hat = v / (1 - b2^t)
    w <- w - lr * m_hat / (sqrt(v_hat) + eps)

Weight decay is always zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradient(FloatingPointError):
    def __init__(self, name):
        super().__init__(f"non-finite gradient in parameter {name!r}")
        self.name = name


@dataclass
class NadamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError(f"betas must lie in (0, 1), got {self.beta1}, {self.beta2}")
        if self.learning_rate <= 0 or self.epsilon <= 0:
            raise ValueError("learning_rate and epsilon must be positive")


def nadam_step(params, state: NadamState, lr=None):
    """Apply one update to every parameter in ``params`` in place.

    ``lr`` overrides ``state.learning_rate`` for this call.
    """
    return _step([(list(params), state.learning_rate if lr is None else lr)], state)


def _step(groups, state):
    for ps, _ in groups:
        for p in ps:
            if not np.all(np.isfinite(p.grad)):
                raise NonFiniteGradient(p.name)
    state.step_count += 1
    t = state.step_count
    b1, b2, eps = state.beta1, state.beta2, state.epsilon
    c1_next = 1.0 - b1 ** (t + 1)
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for ps, rate in groups:
        for p in ps:
            key = id(p)
            m = state.first_moment.get(key)
            if m is None:
                m = state.first_moment[key] = np.zeros_like(p.data)
                state.second_moment[key] = np.zeros_like(p.data)
            v = state.second_moment[key]
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = b1 * m / c1_next + (1.0 - b1) * g / c1
            v_hat = v / c2
            p.data -= rate * m_hat / (np.sqrt(v_hat) + eps)
    return [p for ps, _ in groups for p in ps], state


class Nadam:
    """Optimizer over parameter groups ``[(params, lr), ...]`` sharing one step counter."""

    def __init__(self, groups, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.groups = [(list(ps), float(lr)) for ps, lr in groups]
        lr0 = self.groups[0][1] if self.groups else 1e-3
        self.state = NadamState(lr0, beta1, beta2, epsilon)

    @property
    def params(self):
        return [p for ps, _ in self.groups for p in ps]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        _step(self.groups, self.state)
