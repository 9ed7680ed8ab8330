"""Joint segmentation + score training over non-repeating reference pairs."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .diffcore import Nadam, Tensor, backward
from .pipeline import ModelSet, VideoData
from .segmenter import asm_loss, decode_keyframes


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr_backbone: float = 1e-4
    lr_other: float = 1e-3
    weight_decay: float = 0.0
    epochs: int = 40
    batch_pairs: int = 1
    seed: int = 0
    switch_asm: float = 2.0  # epoch-mean L_ASM below which predicted keyframes feed alignment
    checkpoint_every: int = 0  # 0: only the final checkpoint

    def __post_init__(self):
        if self.lr_backbone <= 0 or self.lr_other <= 0:
            raise ValueError("learning rates must be positive")
        if self.weight_decay != 0:
            raise ValueError("weight decay is fixed at 0")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_pairs != 1:
            raise ValueError("only one pair per optimizer step is supported")


# ----------------------------------------------------------------------------
# reference scheduling


class PairSchedule:
    """Per-query record of references already used; thread-safe."""

    def __init__(self, seed=0):
        self.used = {}
        self.epoch = 0
        self._rng = np.random.default_rng(seed)
        self._lock = threading.Lock()

    def take(self, query_id, eligible_ids):
        """Atomically pick an unused reference for ``query_id`` and mark it."""
        with self._lock:
            used = self.used.setdefault(query_id, set())
            fresh = [e for e in eligible_ids if e not in used]
            if not fresh:
                used.clear()
                fresh = list(eligible_ids)
            choice = fresh[int(self._rng.integers(len(fresh)))]
            used.add(choice)
            return choice


def eligible_references(query, pool):
    return sorted((e for e in pool if e.difficulty == query.difficulty and e.id != query.id),
                  key=lambda e: e.id)


def validate_pool(items):
    """Every item needs a same-difficulty partner to be trainable."""
    if len(items) < 2:
        raise TrainingError(f"need at least 2 training items, got {len(items)}")
    lonely = [it.id for it in items if not eligible_references(it, items)]
    if lonely:
        raise TrainingError(f"no same-difficulty reference for {lonely}")


def next_reference(schedule: PairSchedule, query, pool):
    eligible = eligible_references(query, pool)
    if not eligible:
        raise TrainingError(f"no same-difficulty reference for {query.id}")
    by_id = {e.id: e for e in eligible}
    return by_id[schedule.take(query.id, list(by_id))]


# ----------------------------------------------------------------------------
# loss and steps


def total_loss(asm, x_hat, x_q):
    """L = L_ASM + (X_Q - X_hat)^2; Tensors in, Tensor out (floats give a float)."""
    return asm + (x_hat - x_q) ** 2


def make_optimizer(models: ModelSet, config: TrainConfig):
    backbone = models.segmenter.parameters() + models.parsers.backbone_parameters()
    ids = {id(p) for p in backbone}
    other = [p for p in models.parameters() if id(p) not in ids]
    return Nadam([(backbone, config.lr_backbone), (other, config.lr_other)])


def pair_loss(models: ModelSet, q: VideoData, e: VideoData, keyframe_source):
    """Forward one pair; returns (loss, L_ASM, L_MSE) Tensors.  X_hat is left unclamped."""
    probs = models.segment_probs(q)
    l_asm = asm_loss(probs, q.gt_keyframes)
    if keyframe_source == "ground_truth":
        K_Q, K_E = q.gt_keyframes, e.gt_keyframes
    else:
        K_Q = decode_keyframes(probs.data, models.config.min_gap)
        K_E = models.keyframes(e, "predicted")
    both = models.features_batch([models.align(q, K_Q), models.align(e, K_E)])
    fq, fe = both.select(0), both.select(1)
    _, fused = models.score(fq, fe)
    x_hat = fused["total"] + e.score
    l_mse = (x_hat - q.score) ** 2
    return l_asm + l_mse, l_asm, l_mse


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    asm: float
    mse: float
    pairs: int
    keyframe_source: str
    seconds: float


def train_epoch(models: ModelSet, optimizer, data, schedule: PairSchedule, rng, keyframe_source):
    if not data:
        raise TrainingError("empty training set: no pairs to train on")
    order = rng.permutation(len(data))
    sums = np.zeros(3)
    start = time.perf_counter()
    for i in order:
        q = data[i]
        e = next_reference(schedule, q, data)
        loss, l_asm, l_mse = pair_loss(models, q, e, keyframe_source)
        if not np.isfinite(loss.data):
            raise TrainingError(f"non-finite loss on pair ({q.id}, {e.id})")
        optimizer.zero_grad()
        backward(loss)
        optimizer.step()
        sums += (float(loss.data), float(l_asm.data), float(l_mse.data))
    schedule.epoch += 1
    mean = sums / len(data)
    return EpochMetrics(schedule.epoch, mean[0], mean[1], mean[2], len(data), keyframe_source,
                        time.perf_counter() - start)


def fit(models: ModelSet, data, config: TrainConfig, out_dir=None, log=None):
    """Train for ``config.epochs``; returns the list of EpochMetrics.

    Alignment uses ground-truth keyframes until an epoch's mean L_ASM drops
    below ``config.switch_asm``, then predicted keyframes for the rest.
    """
    validate_pool(data)
    missing = [v.id for v in data if v.gt_keyframes is None]
    if missing:
        raise TrainingError(f"training items without ground-truth keyframes: {missing[:5]}")
    rng = np.random.default_rng(config.seed)
    schedule = PairSchedule(config.seed)
    optimizer = make_optimizer(models, config)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "metrics.jsonl").write_text("")
    source = "ground_truth"
    history = []
    for _ in range(config.epochs):
        m = train_epoch(models, optimizer, data, schedule, rng, source)
        history.append(m)
        if log is not None:
            log(m)
        if out_dir is not None:
            with open(out_dir / "metrics.jsonl", "a", encoding="utf-8") as fh:
                fh.write(json.dumps(asdict(m)) + "\n")
            if config.checkpoint_every and m.epoch % config.checkpoint_every == 0:
                models.save(out_dir / f"epoch_{m.epoch:03d}.dpw")
        if source == "ground_truth" and m.asm < config.switch_asm:
            source = "predicted"
    if out_dir is not None:
        models.save(out_dir / "model.dpw")
    return history
