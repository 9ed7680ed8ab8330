"""Metrics, reference selection and multi-reference voting."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .pipeline import ModelSet, VideoData
from .scorer import predict_score
from .segmenter import aiou, corpus_aiou


class EvaluationError(ValueError):
    pass


def spearman(pred, gt):
    """Pearson correlation of average ranks.  Constant predictions give 0."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 1 or len(pred) < 2:
        raise EvaluationError(f"need two equal-length score lists of at least 2, got {pred.shape}, {gt.shape}")
    if np.all(gt == gt[0]):
        raise EvaluationError("ground-truth scores are all equal; rank correlation undefined")
    rp, rg = rankdata(pred), rankdata(gt)
    rp, rg = rp - rp.mean(), rg - rg.mean()
    denom = np.sqrt((rp @ rp) * (rg @ rg))
    if denom == 0:
        return 0.0
    return float(np.clip((rp @ rg) / denom, -1.0, 1.0))


def relative_l2(pred, gt, score_range):
    """Mean squared range-normalized error (multiply by 100 for reporting)."""
    lo, hi = score_range
    if not hi > lo:
        raise EvaluationError(f"score range must have max > min, got {score_range}")
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    return float(np.mean((np.abs(pred - gt) / (hi - lo)) ** 2))


def select_references(test_item, training_set, L=5):
    """Same difficulty, closest frame count, ties by id; first L."""
    pool = [e for e in training_set if e.difficulty == test_item.difficulty]
    if len(pool) < L:
        raise EvaluationError(f"{test_item.id}: only {len(pool)} same-difficulty training items, need {L}")
    pool.sort(key=lambda e: (abs(e.num_frames - test_item.num_frames), e.id))
    return pool[:L]


class CachedScorer:
    """Scores pairs from per-video features computed once with predicted keyframes."""

    def __init__(self, models: ModelSet, score_range=(0.0, 100.0)):
        self.models, self.score_range = models, score_range
        self._cache = {}

    def _entry(self, video: VideoData):
        if video.id not in self._cache:
            K = self.models.keyframes(video, "predicted")
            self._cache[video.id] = (K, self.models.features(self.models.align(video, K)))
        return self._cache[video.id]

    def keyframes(self, video):
        return self._entry(video)[0]

    def predict(self, query, reference):
        _, fused = self.models.score(self._entry(query)[1], self._entry(reference)[1])
        return predict_score(float(fused["total"].data), reference.score, self.score_range)


def vote_inference(scorer, query, references):
    """Mean over references of the per-reference prediction X_E + SD_total."""
    if not references:
        raise EvaluationError(f"{query.id}: no references to vote with")
    votes = [scorer.predict(query, e) for e in references]
    return float(np.mean(votes)), votes


@dataclass
class EvalReport:
    rho: float
    r_l2_x100: float
    aiou: dict
    mean_iou: float
    L: int
    items: list = field(default_factory=list)

    def to_json(self):
        d = {"rho": self.rho, "r_l2_x100": self.r_l2_x100,
             "aiou": {str(k): v for k, v in self.aiou.items()}, "mean_iou": self.mean_iou, "L": self.L,
             "items": self.items}
        return d

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1)

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "gt", "prediction", "votes", "references"])
            for it in self.items:
                w.writerow([it["id"], repr(it["gt"]), repr(it["prediction"]),
                            ";".join(repr(v) for v in it["votes"]), ";".join(it["references"])])


def evaluate(models, test_set, training_set, L=5, score_range=(0.0, 100.0), thresholds=(0.5, 0.75)):
    """Voted predictions for every test item, then rho, R-l2 and AIoU.

    ``models`` is a ModelSet or any object with ``predict(q, e)`` and
    ``keyframes(v)`` (such as a CachedScorer).
    """
    scorer = CachedScorer(models, score_range) if isinstance(models, ModelSet) else models
    items, ious = [], []
    for q in sorted(test_set, key=lambda v: v.id):
        refs = select_references(q, training_set, L)
        pred, votes = vote_inference(scorer, q, refs)
        entry = {"id": q.id, "gt": q.score, "prediction": pred, "votes": votes,
                 "references": [e.id for e in refs]}
        if q.gt_keyframes is not None:
            K = scorer.keyframes(q)
            r = aiou(K, q.gt_keyframes, thresholds)
            entry["keyframes"] = list(K.transitions)
            entry["mean_iou"] = r.mean_iou
            ious.append(r.mean_iou)
        items.append(entry)
    pred = [it["prediction"] for it in items]
    gt = [it["gt"] for it in items]
    return EvalReport(
        rho=spearman(pred, gt), r_l2_x100=100.0 * relative_l2(pred, gt, score_range),
        aiou=corpus_aiou(ious, thresholds) if ious else {},
        mean_iou=float(np.mean(ious)) if ious else float("nan"), L=L, items=items)
