"""Central finite-difference verification of backward()."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import backward


@dataclass
class ParamCheck:
    name: str
    max_rel_error: float
    checked: int
    passed: bool


@dataclass
class GradCheckReport:
    tolerance: float
    params: list

    @property
    def passed(self):
        return all(p.passed for p in self.params)

    @property
    def worst(self):
        return max((p.max_rel_error for p in self.params), default=0.0)

    def failures(self):
        return [p for p in self.params if not p.passed]


def grad_check(fn, params, tolerance=1e-4, step=1e-5, max_entries=None, rng=None,
               relative_floor=1e-3):
    """Compare analytic gradients of the scalar ``fn()`` against central differences.

    The error for a parameter is ``max|analytic - numeric|`` over the checked
    entries divided by the largest gradient magnitude among them.  That scale
    is floored at ``relative_floor`` times the largest analytic gradient over
    all parameters, so identically-zero gradients are judged against the
    model's gradient scale rather than against rounding noise.  ``max_entries`` caps the entries probed per
    parameter (sampled with ``rng``).
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    for p in params:
        p.zero_grad()
    backward(fn())
    analytic = {id(p): p.grad.copy() for p in params}
    global_scale = max((np.max(np.abs(g)) for g in analytic.values() if g.size), default=0.0)
    floor = max(relative_floor * global_scale, 1e-12)
    for p in params:
        p.zero_grad()

    results = []
    for p in params:
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        numeric = np.empty(len(idx))
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = float(fn().data)
            flat[i] = orig - step
            f_minus = float(fn().data)
            flat[i] = orig
            numeric[j] = (f_plus - f_minus) / (2.0 * step)
        a = analytic[id(p)].reshape(-1)[idx]
        scale = max(np.max(np.abs(a)), np.max(np.abs(numeric)), floor)
        err = float(np.max(np.abs(a - numeric)) / scale)
        results.append(ParamCheck(p.name, err, len(idx), err <= tolerance))
    return GradCheckReport(tolerance, results)
