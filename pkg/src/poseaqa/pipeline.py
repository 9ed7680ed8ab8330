"""Pair scoring: segment, align, parse and score one (query, reference) pair."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .aligner import AlignedVideo, align_video, pair_up
from .diffcore import Module, Tensor, load_parameters, save_parameters
from .parsers import FeatureBundle, Parsers
from .posedata import PHASE_NAMES, ROI_JOINTS, compose_action_units, pool_descriptor
from .scorer import ScoreBreakdown, ScoreHead, ScoreWeights
from .segmenter import KeyframeSet, SegmenterModel, decode_keyframes, frame_features

KEYFRAME_SOURCES = ("predicted", "ground_truth")


class PipelineError(RuntimeError):
    def __init__(self, stage, message):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass
class VideoData:
    """Model-ready per-video arrays: pose vectors and pooled action-unit descriptors."""

    id: str
    difficulty: float
    score: float
    pose: np.ndarray  # (T, 2J + U + 1)
    descriptors: np.ndarray  # (T, grid*grid)
    gt_keyframes: Optional[KeyframeSet] = None

    @property
    def num_frames(self):
        return len(self.pose)

    @property
    def frame_inputs(self):
        return frame_features(self.pose, self.descriptors)


def prepare_video(video, roi_joints=ROI_JOINTS, P=16, crop_frac=0.25, grid=8) -> VideoData:
    """io.Video -> VideoData (action-unit composites are pooled and then dropped)."""
    item, pose = video.item, video.pose
    if len(pose) < 4:
        raise PipelineError("prepare", f"{item.id}: {len(pose)} frames, need at least 4")
    units = compose_action_units(video.frames, pose, roi_joints, P, crop_frac)
    gt = KeyframeSet(tuple(item.gt_keyframes), len(pose)) if item.gt_keyframes is not None else None
    return VideoData(item.id, float(item.difficulty), float(item.score), pose.pose_vectors(),
                     pool_descriptor(units, grid), gt)


@dataclass
class ModelConfig:
    pose_dim: int = 29
    desc_dim: int = 64
    d: int = 32
    landmarks: int = 8
    heads: int = 1
    depth: int = 1
    M: int = 16
    M_c: int = 24
    N: int = 3
    seg_hidden: int = 32
    seg_kernel: int = 5
    seg_layers: int = 3
    reg_hidden: int = 32
    sd_scale: float = 10.0
    min_gap: int = 2
    use_pure_pose: bool = True
    use_static: bool = True


class ModelSet(Module):
    def __init__(self, config: ModelConfig, weights: ScoreWeights, seed=0):
        if weights.N != config.N:
            raise ValueError(f"{weights.N} delta weights for {config.N} sub-phases")
        rng = np.random.default_rng(seed)
        self.config, self.weights = config, weights
        self.segmenter = SegmenterModel(config.pose_dim + config.desc_dim, config.seg_hidden, config.N,
                                        rng, config.seg_kernel, config.seg_layers)
        self.parsers = Parsers(config.pose_dim, config.desc_dim, config.d, rng, config.landmarks,
                               config.heads, config.depth)
        self.head = ScoreHead(config.d, config.reg_hidden, rng, weights, config.sd_scale,
                              config.use_pure_pose, config.use_static)
        names = [p.name for p in self.parameters()]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names in model set")

    def save(self, path):
        save_parameters(self.parameters(), path)

    def load(self, path):
        load_parameters(self.parameters(), path)

    # -- stages -------------------------------------------------------------

    def segment_probs(self, video: VideoData) -> Tensor:
        return self.segmenter(Tensor(video.frame_inputs))

    def keyframes(self, video: VideoData, source="predicted", probs=None) -> KeyframeSet:
        if source == "ground_truth":
            if video.gt_keyframes is None:
                raise PipelineError("segment", f"{video.id} has no ground-truth keyframes")
            return video.gt_keyframes
        if source != "predicted":
            raise PipelineError("segment", f"unknown keyframe source {source!r}")
        p = probs.data if probs is not None else self.segment_probs(video).data
        return decode_keyframes(p, self.config.min_gap)

    def align(self, video: VideoData, K: KeyframeSet) -> AlignedVideo:
        try:
            return align_video(video.pose, video.descriptors, K, self.config.M, self.config.M_c)
        except ValueError as exc:
            raise PipelineError("align", f"{video.id}: {exc}") from exc

    def features(self, aligned: AlignedVideo) -> FeatureBundle:
        return self.parsers.extract(aligned.motion_pose, aligned.motion_au, aligned.condition_au)

    def features_batch(self, aligned_videos):
        """Features for several videos in one batched pass (leading axis = video).

        Faster for training; results can differ from per-video extraction in
        the last bits, so exact-antisymmetry paths use ``features``.
        """
        return self.parsers.extract(np.stack([a.motion_pose for a in aligned_videos]),
                                    np.stack([a.motion_au for a in aligned_videos]),
                                    np.stack([a.condition_au for a in aligned_videos]))

    def score(self, fq: FeatureBundle, fe: FeatureBundle):
        sd = self.head.subscores(fq, fe)
        return sd, self.head.fuse(sd)


@dataclass
class PairResult:
    query_id: str
    reference_id: str
    keyframe_source: str
    K_Q: KeyframeSet
    K_E: KeyframeSet
    breakdown: ScoreBreakdown
    features_query: dict = field(default_factory=dict)
    features_reference: dict = field(default_factory=dict)
    aligned: Optional[list] = field(default=None, repr=False, compare=False)

    @property
    def sd_total(self):
        return self.breakdown.total

    @property
    def predicted(self):
        return self.breakdown.predicted

    def staged(self):
        """Per-stage view: one entry per motion sub-phase, then condition and fusion."""
        b = self.breakdown
        names = list(PHASE_NAMES) if len(b.pose) == len(PHASE_NAMES) else [
            f"phase_{i + 1}" for i in range(len(b.pose))]
        stages = {name: {"pose": b.pose[i], "static_pose": b.static_pose[i],
                         "appearance": b.appearance[i], "static_appearance": b.static_appearance[i]}
                  for i, name in enumerate(names)}
        stages["condition"] = {"condition": b.condition, "static_condition": b.static_condition}
        return stages

    def to_json(self):
        return {
            "query": self.query_id, "reference": self.reference_id,
            "keyframe_source": self.keyframe_source,
            "keyframes_query": list(self.K_Q.transitions), "frames_query": self.K_Q.end_index,
            "keyframes_reference": list(self.K_E.transitions), "frames_reference": self.K_E.end_index,
            "stages": self.staged(),
            "breakdown": self.breakdown.to_json(),
            "features_query": self.features_query, "features_reference": self.features_reference,
        }

    @classmethod
    def from_json(cls, d):
        return cls(d["query"], d["reference"], d["keyframe_source"],
                   KeyframeSet(tuple(d["keyframes_query"]), d["frames_query"]),
                   KeyframeSet(tuple(d["keyframes_reference"]), d["frames_reference"]),
                   ScoreBreakdown.from_json(d["breakdown"]),
                   d.get("features_query", {}), d.get("features_reference", {}))


def mmp(models: ModelSet, query: VideoData, reference: VideoData, keyframe_source="predicted",
        score_range=(0.0, 100.0), keep_features=False) -> PairResult:
    """Score ``query`` against ``reference``: X_hat = X_E + SD_total."""
    if query.difficulty != reference.difficulty:
        raise PipelineError("pair", f"{query.id} (difficulty {query.difficulty}) and {reference.id} "
                                    f"(difficulty {reference.difficulty}) differ in difficulty")
    try:
        K_Q = models.keyframes(query, keyframe_source)
        K_E = models.keyframes(reference, keyframe_source)
    except ValueError as exc:
        raise PipelineError("segment", str(exc)) from exc
    aq, ae = models.align(query, K_Q), models.align(reference, K_E)
    # each video is parsed on its own so swapping roles reuses bitwise-identical features
    fq, fe = models.features(aq), models.features(ae)
    sd, fused = models.score(fq, fe)
    breakdown = models.head.breakdown(sd, fused, reference.score, score_range)
    return PairResult(query.id, reference.id, keyframe_source, K_Q, K_E, breakdown,
                      fq.to_json() if keep_features else {}, fe.to_json() if keep_features else {},
                      pair_up(aq, ae))
