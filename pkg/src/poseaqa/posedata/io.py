"""On-disk formats: pose JSON Lines, AUF1 frame binaries and the corpus manifest."""

from __future__ import annotations

import json
import os
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import DegenerateAngleError, angles_from_joints
from .types import PoseFrame, PoseSequence, PoseValidationError, PoseWarning, VideoItem

FRAME_MAGIC = b"AUF1"
ANGLE_TOLERANCE = 0.05  # radians; larger file/joint disagreement triggers a warning


class CorpusError(ValueError):
    pass


# ----------------------------------------------------------------------------
# pose sequences


def _parse_frame(obj, lineno, J, U):
    if not isinstance(obj, dict):
        raise PoseValidationError(f"line {lineno}: expected a JSON object")
    for key in ("joints", "angles", "bbox"):
        if key not in obj:
            raise PoseValidationError(f"line {lineno}: missing field {key!r}")
    try:
        frame = PoseFrame(obj["joints"], obj["angles"], obj["bbox"])
    except (TypeError, ValueError) as exc:
        raise PoseValidationError(f"line {lineno}: non-numeric pose data ({exc})") from None
    try:
        frame.validate(J, U)
    except PoseValidationError as exc:
        raise PoseValidationError(f"line {lineno}: {exc}") from None
    return frame


def load_pose_sequence(path, J=12, U=4, triples=None):
    """Read a pose JSON-Lines file into a validated PoseSequence.

    Angles are kept as stored; each is compared with the value derived from
    the joints and a PoseWarning names frames that disagree by more than
    ``ANGLE_TOLERANCE``.  Pass ``triples`` for non-default angle definitions
    (``U`` must match their count); cross-checking is skipped when J differs
    from the default skeleton and no triples are given.
    """
    path = Path(path)
    frames = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PoseValidationError(f"{path}: line {lineno}: malformed JSON ({exc.msg})") from None
            try:
                frames.append(_parse_frame(obj, lineno, J, U))
            except PoseValidationError as exc:
                raise PoseValidationError(f"{path}: {exc}") from None
    if not frames:
        raise PoseValidationError(f"{path}: no frames")
    seq = PoseSequence.from_frames(frames)
    if triples is not None or (J == 12 and U == 4):
        _cross_check_angles(seq, path, triples)
    return seq


def _cross_check_angles(seq, path, triples):
    try:
        derived = angles_from_joints(seq.joints) if triples is None else angles_from_joints(seq.joints, triples)
    except DegenerateAngleError as exc:
        warnings.warn(f"{path}: cannot cross-check angles ({exc})", PoseWarning, stacklevel=3)
        return
    bad = np.flatnonzero(np.any(np.abs(derived - seq.angles) > ANGLE_TOLERANCE, axis=1))
    if bad.size:
        worst = float(np.max(np.abs(derived - seq.angles)))
        warnings.warn(f"{path}: stored angles differ from joint-derived angles by up to {worst:.3f} rad "
                      f"in frames {bad.tolist()}", PoseWarning, stacklevel=3)


def save_pose_sequence(seq: PoseSequence, path):
    with open(path, "w", encoding="utf-8") as fh:
        for f in seq:
            fh.write(json.dumps({"joints": f.joints.tolist(), "angles": f.angles.tolist(),
                                 "bbox": f.bbox.tolist()}) + "\n")


# ----------------------------------------------------------------------------
# frame binaries


def save_frames(frames, path):
    frames = np.asarray(frames)
    if frames.ndim != 3:
        raise ValueError(f"frames must be (T, H, W), got shape {frames.shape}")
    with open(path, "wb") as fh:
        fh.write(FRAME_MAGIC)
        fh.write(struct.pack("<3I", *frames.shape))
        fh.write(np.ascontiguousarray(frames, dtype="<f4").tobytes())


def load_frames(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != FRAME_MAGIC:
        raise CorpusError(f"{path}: bad magic {blob[:4]!r}, expected {FRAME_MAGIC!r}")
    if len(blob) < 16:
        raise CorpusError(f"{path}: truncated header")
    T, H, W = struct.unpack("<3I", blob[4:16])
    expected = 16 + 4 * T * H * W
    if len(blob) != expected:
        raise CorpusError(f"{path}: expected {expected} bytes for {T}x{H}x{W} frames, found {len(blob)}")
    return np.frombuffer(blob, dtype="<f4", offset=16).reshape(T, H, W).astype(np.float32)


# ----------------------------------------------------------------------------
# corpus


@dataclass
class Video:
    """A VideoItem together with its pose track and frames."""

    item: VideoItem
    pose: PoseSequence
    frames: np.ndarray


@dataclass
class Corpus:
    directory: Path
    manifest: dict
    items: list

    @property
    def score_range(self):
        return float(self.manifest.get("score_min", 0.0)), float(self.manifest["score_max"])

    def split(self, name):
        return [it for it in self.items if it.split == name]

    def load_video(self, item: VideoItem, J=12, U=4) -> Video:
        pose = load_pose_sequence(self.directory / item.pose_path, J, U)
        frames = load_frames(self.directory / item.frames_path)
        if len(frames) != len(pose):
            raise CorpusError(f"{item.id}: {len(pose)} pose frames but {len(frames)} image frames")
        return Video(item, pose, frames)


def write_corpus(videos, directory, score_max, score_min=0.0, extra=None):
    """Write pose files, frame binaries and ``manifest.json``; return the manifest."""
    videos = list(videos)
    if not videos:
        raise CorpusError("cannot write an empty corpus")
    directory = Path(directory)
    ids = [v.item.id for v in videos]
    if len(set(ids)) != len(ids):
        raise CorpusError("duplicate video ids in corpus")
    for sub in ("poses", "frames"):
        (directory / sub).mkdir(parents=True, exist_ok=True)
    entries = []
    for v in videos:
        item = v.item
        if not score_min <= item.score <= score_max:
            raise CorpusError(f"{item.id}: score {item.score} outside [{score_min}, {score_max}]")
        item.pose_path = f"poses/{item.id}.jsonl"
        item.frames_path = f"frames/{item.id}.auf"
        item.num_frames = len(v.pose)
        try:
            save_pose_sequence(v.pose, directory / item.pose_path)
            save_frames(v.frames, directory / item.frames_path)
        except OSError as exc:
            raise CorpusError(f"writing {item.id} under {directory}: {exc}") from exc
        entries.append(item.to_json())
    manifest = {"score_max": float(score_max), "score_min": float(score_min),
                "difficulties": sorted({float(v.item.difficulty) for v in videos})}
    manifest.update(extra or {})
    manifest["items"] = entries
    tmp = directory / "manifest.json.tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=1)
        os.replace(tmp, directory / "manifest.json")
    except OSError as exc:
        raise CorpusError(f"writing manifest in {directory}: {exc}") from exc
    return manifest


def load_corpus(directory) -> Corpus:
    directory = Path(directory)
    path = directory / "manifest.json"
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise CorpusError(f"no manifest at {path}") from None
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: malformed JSON ({exc.msg})") from None
    if "score_max" not in manifest or "items" not in manifest:
        raise CorpusError(f"{path}: manifest needs 'score_max' and 'items'")
    lo, hi = float(manifest.get("score_min", 0.0)), float(manifest["score_max"])
    items = []
    for i, entry in enumerate(manifest["items"]):
        try:
            item = VideoItem.from_json(entry)
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"{path}: items[{i}]: {exc!r}") from None
        if not lo <= item.score <= hi:
            raise CorpusError(f"{path}: items[{i}] ({item.id}): score {item.score} outside [{lo}, {hi}]")
        if item.difficulty <= 0:
            raise CorpusError(f"{path}: items[{i}] ({item.id}): difficulty must be positive")
        items.append(item)
    if not items:
        raise CorpusError(f"{path}: corpus has no items")
    return Corpus(directory, manifest, items)
