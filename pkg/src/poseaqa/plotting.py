"""Report figures written to PNG files (non-interactive backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 110,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def prediction_scatter(gt, pred, path, score_range=None, title=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 4))
        ax.scatter(gt, pred, s=12, alpha=0.7, color="tab:blue", edgecolor="none")
        lo = min(np.min(gt), np.min(pred)) if score_range is None else score_range[0]
        hi = max(np.max(gt), np.max(pred)) if score_range is None else score_range[1]
        ax.plot([lo, hi], [lo, hi], color="0.4", lw=0.8, ls="--")
        ax.set_xlabel("ground-truth score")
        ax.set_ylabel("predicted score")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def loss_curves(history, path):
    """``history``: list of dicts or objects with epoch, loss, asm, mse."""
    rows = [h if isinstance(h, dict) else vars(h) for h in history]
    epochs = [r["epoch"] for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        for key, color in (("loss", "k"), ("asm", "tab:orange"), ("mse", "tab:blue")):
            ax.plot(epochs, [r[key] for r in rows], color=color, lw=1.2, label=key)
        switched = [r["epoch"] for r in rows if r.get("keyframe_source") == "predicted"]
        if switched:
            ax.axvline(switched[0] - 0.5, color="0.5", lw=0.8, ls=":", label="predicted keyframes")
        ax.set_yscale("log")
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean loss per pair")
        ax.legend(frameon=False)
        return _save(fig, path)


def segmentation_plot(probs, path, predicted=None, ground_truth=None, title=None):
    """Per-frame transition probabilities with predicted and true keyframes."""
    probs = np.asarray(probs)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 2.8))
        for h in range(probs.shape[1]):
            ax.plot(probs[:, h], lw=1.2, label=f"transition {h + 1}")
        for k in predicted or ():
            ax.axvline(k, color="tab:red", lw=0.8, ls="--")
        for k in ground_truth or ():
            ax.axvline(k, color="0.2", lw=0.8, ls=":")
        ax.set_xlabel("frame")
        ax.set_ylabel("probability")
        ax.set_ylim(0, 1.02)
        if title:
            ax.set_title(title)
        ax.legend(frameon=False, fontsize=7, loc="upper left")
        return _save(fig, path)
