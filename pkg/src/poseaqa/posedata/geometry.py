from __future__ import annotations

import numpy as np

from .types import ANGLE_TRIPLES


class DegenerateAngleError(ValueError):
    pass


def joint_angle(a, b, c):
    """Interior angle at ``b`` between segments b->a and b->c, in [0, pi]."""
    a, b, c = (np.asarray(p, dtype=np.float64) for p in (a, b, c))
    u, v = a - b, c - b
    nu, nv = np.hypot(*u), np.hypot(*v)
    if nu == 0 or nv == 0:
        raise DegenerateAngleError(f"zero-length segment at joint {tuple(b)}")
    # atan2 of cross and dot stays accurate near 0 and pi, unlike arccos
    cross = u[0] * v[1] - u[1] * v[0]
    return float(np.arctan2(abs(cross), u @ v))


def angles_from_joints(joints, triples=ANGLE_TRIPLES):
    """Vectorized joint_angle over (..., J, 2) joints -> (..., U)."""
    joints = np.asarray(joints, dtype=np.float64)
    idx = np.asarray(triples)
    a, b, c = joints[..., idx[:, 0], :], joints[..., idx[:, 1], :], joints[..., idx[:, 2], :]
    u, v = a - b, c - b
    if np.any(np.hypot(u[..., 0], u[..., 1]) == 0) or np.any(np.hypot(v[..., 0], v[..., 1]) == 0):
        raise DegenerateAngleError("zero-length segment in angle triple")
    cross = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    dot = (u * v).sum(axis=-1)
    return np.arctan2(np.abs(cross), dot)


def bbox_from_joints(joints, margin=0.03):
    """Axis-aligned (x, y, w, h) around (..., J, 2) joints, padded by ``margin``."""
    joints = np.asarray(joints, dtype=np.float64)
    lo = joints.min(axis=-2) - margin
    hi = joints.max(axis=-2) + margin
    return np.concatenate([lo, hi - lo], axis=-1)
