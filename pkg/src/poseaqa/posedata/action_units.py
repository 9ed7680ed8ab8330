"""Action-unit images: joint-centred crops tiled into one composite per frame."""

from __future__ import annotations

import warnings

import numpy as np

from .types import ROI_JOINTS, ActionUnitImage, PoseFrame, PoseSequence, PoseWarning


def grid_shape(Y):
    cols = int(np.ceil(np.sqrt(Y)))
    return int(np.ceil(Y / cols)), cols


def _bilinear(image, u, v):
    """Sample ``image`` (H, W) at normalized coords (u=x, v=y).

    Points outside [0, 1) read as zero; inside, bilinear with border clamp.
    """
    H, W = image.shape
    inside = (u >= 0) & (u < 1) & (v >= 0) & (v < 1)
    px = np.clip(u * W - 0.5, 0, W - 1)
    py = np.clip(v * H - 0.5, 0, H - 1)
    x0 = np.floor(px).astype(int)
    y0 = np.floor(py).astype(int)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx, fy = px - x0, py - y0
    top = image[y0, x0] * (1 - fx) + image[y0, x1] * fx
    bottom = image[y1, x0] * (1 - fx) + image[y1, x1] * fx
    return np.where(inside, top * (1 - fy) + bottom * fy, 0.0)


def _crop_offsets(P):
    # sample centres of a P x P patch on a unit-side window, in [-1/2, 1/2]
    return (np.arange(P) + 0.5) / P - 0.5


def compose_action_unit(frame_pixels, pose: PoseFrame, roi_joints=ROI_JOINTS, P=16, crop_frac=0.25):
    image = np.asarray(frame_pixels, dtype=np.float64)
    Y = len(roi_joints)
    rows, cols = grid_shape(Y)
    out = np.zeros((rows * P, cols * P))
    w, h = float(pose.bbox[2]), float(pose.bbox[3])
    if not (np.isfinite(w) and np.isfinite(h) and w > 0 and h > 0):
        warnings.warn(f"degenerate bbox {pose.bbox.tolist()}; action-unit patches left empty",
                      PoseWarning, stacklevel=2)
        return ActionUnitImage(out, Y, P)
    side = crop_frac * np.hypot(w, h)
    offs = _crop_offsets(P) * side
    for i, j in enumerate(roi_joints):
        cx, cy = pose.joints[j]
        u = cx + offs[None, :]
        v = cy + offs[:, None]
        r, c = divmod(i, cols)
        out[r * P:(r + 1) * P, c * P:(c + 1) * P] = _bilinear(image, np.broadcast_to(u, (P, P)),
                                                            np.broadcast_to(v, (P, P)))
    return ActionUnitImage(np.clip(out, 0.0, 1.0), Y, P)


def compose_action_units(frames, seq: PoseSequence, roi_joints=ROI_JOINTS, P=16, crop_frac=0.25):
    """All frames at once -> (T, rows*P, cols*P).  Same result as the per-frame call."""
    frames = np.asarray(frames, dtype=np.float64)
    T = len(seq)
    Y = len(roi_joints)
    rows, cols = grid_shape(Y)
    out = np.zeros((T, rows * P, cols * P))
    diag = np.hypot(seq.bbox[:, 2], seq.bbox[:, 3])
    ok = (seq.bbox[:, 2] > 0) & (seq.bbox[:, 3] > 0) & np.isfinite(diag)
    if not np.all(ok):
        warnings.warn(f"degenerate bbox in frames {np.flatnonzero(~ok).tolist()}; patches left empty",
                      PoseWarning, stacklevel=2)
    offs = _crop_offsets(P)
    for t in np.flatnonzero(ok):
        side = crop_frac * diag[t]
        centres = seq.joints[t, list(roi_joints)]  # (Y, 2)
        u = centres[:, 0, None, None] + (offs * side)[None, None, :]
        v = centres[:, 1, None, None] + (offs * side)[None, :, None]
        u, v = np.broadcast_arrays(u, v)
        patches = _bilinear(frames[t], u, v)
        for i in range(Y):
            r, c = divmod(i, cols)
            out[t, r * P:(r + 1) * P, c * P:(c + 1) * P] = patches[i]
    return np.clip(out, 0.0, 1.0)


def pool_descriptor(images, grid=8):
    """Average-pool (..., H, W) images onto a grid x grid lattice and flatten."""
    images = np.asarray(images, dtype=np.float64)
    H, W = images.shape[-2:]
    rb = np.array_split(np.arange(H), grid)
    cb = np.array_split(np.arange(W), grid)
    if H % grid == 0 and W % grid == 0:
        lead = images.shape[:-2]
        blocks = images.reshape(*lead, grid, H // grid, grid, W // grid)
        return blocks.mean(axis=(-3, -1)).reshape(*lead, grid * grid)
    out = np.stack([np.stack([images[..., r[0]:r[-1] + 1, c[0]:c[-1] + 1].mean(axis=(-2, -1))
                              for c in cb], axis=-1) for r in rb], axis=-2)
    return out.reshape(*images.shape[:-2], grid * grid)
