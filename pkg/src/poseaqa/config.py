"""Run configuration: one JSON file, strict keys, validated at load."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .pipeline import ModelConfig
from .scorer import ScoreWeights, WeightError
from .trainer import TrainConfig

CONFIG_ENV = "POSEAQA_CONFIG"


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class PathsSection:
    corpus_dir: str = "corpus"
    checkpoint_dir: str = "runs/checkpoints"
    output_dir: str = "runs/output"


@dataclass
class ModelSection:
    d: int = 32
    landmarks: int = 8
    heads: int = 1
    depth: int = 1
    M: int = 16
    M_c: int = 24
    N: int = 3
    J: int = 12
    U: int = 4
    Y: int = 8
    P: int = 16
    crop_frac: float = 0.25
    descriptor_grid: int = 8
    seg_hidden: int = 32
    seg_kernel: int = 5
    seg_layers: int = 3
    reg_hidden: int = 32
    sd_scale: float = 10.0
    min_gap: int = 2
    use_pure_pose: bool = True
    use_static: bool = True


@dataclass
class WeightsSection:
    delta: list = field(default_factory=lambda: [0.30, 0.55, 0.15])
    alpha: float = 0.7
    beta: float = 0.3


@dataclass
class TrainSection:
    lr_backbone: float = 1e-4
    lr_other: float = 1e-3
    weight_decay: float = 0.0
    epochs: int = 40
    batch_pairs: int = 1
    switch_asm: float = 2.0
    checkpoint_every: int = 0


@dataclass
class EvalSection:
    L: int = 5
    thresholds: list = field(default_factory=lambda: [0.5, 0.75])


@dataclass
class SynthSection:
    train_items: int = 300
    test_items: int = 100
    judge_noise: float = 2.0
    image_size: int = 64


@dataclass
class RunConfig:
    seed: int = 0
    paths: PathsSection = field(default_factory=PathsSection)
    model: ModelSection = field(default_factory=ModelSection)
    weights: WeightsSection = field(default_factory=WeightsSection)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)
    synth: SynthSection = field(default_factory=SynthSection)

    def to_json(self):
        return asdict(self)

    # -- conversions -------------------------------------------------------

    def model_config(self) -> ModelConfig:
        m = self.model
        return ModelConfig(
            pose_dim=2 * m.J + m.U + 1, desc_dim=m.descriptor_grid ** 2, d=m.d, landmarks=m.landmarks,
            heads=m.heads, depth=m.depth, M=m.M, M_c=m.M_c, N=m.N, seg_hidden=m.seg_hidden,
            seg_kernel=m.seg_kernel, seg_layers=m.seg_layers, reg_hidden=m.reg_hidden,
            sd_scale=m.sd_scale, min_gap=m.min_gap, use_pure_pose=m.use_pure_pose,
            use_static=m.use_static)

    def score_weights(self) -> ScoreWeights:
        w = self.weights
        return ScoreWeights(tuple(w.delta), w.alpha, w.beta)

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(t.lr_backbone, t.lr_other, t.weight_decay, t.epochs, t.batch_pairs, self.seed,
                           t.switch_asm, t.checkpoint_every)


def _check_type(value, default, path):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, list):
        ok = isinstance(value, list) and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                              for v in value)
        value = [float(v) for v in value] if ok else value
    else:
        ok = True
    if not ok:
        raise ConfigError(path, f"expected {type(default).__name__}, got {json.dumps(value)}")
    return value


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise ConfigError(prefix or "<root>", "expected a JSON object")
    obj = cls()
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{prefix}.{key}" if prefix else key, "unknown key")
    for f in fields(cls):
        if f.name not in data:
            continue
        path = f"{prefix}.{f.name}" if prefix else f.name
        default = getattr(obj, f.name)
        value = data[f.name]
        if hasattr(default, "__dataclass_fields__"):
            setattr(obj, f.name, _build(type(default), value, path))
        else:
            setattr(obj, f.name, _check_type(value, default, path))
    return obj


def _positive(cfg, section, names):
    for name in names:
        if getattr(getattr(cfg, section), name) <= 0:
            raise ConfigError(f"{section}.{name}", "must be positive")


def validate(cfg: RunConfig) -> RunConfig:
    m = cfg.model
    _positive(cfg, "model", ["d", "landmarks", "heads", "depth", "N", "P", "crop_frac", "descriptor_grid",
                             "seg_hidden", "seg_kernel", "seg_layers", "reg_hidden", "sd_scale", "min_gap"])
    if (m.J, m.U, m.Y) != (12, 4, 8):
        raise ConfigError("model.J", "only the 12-joint, 4-angle, 8-region skeleton is supported")
    if m.M < 2:
        raise ConfigError("model.M", "must be at least 2")
    if m.M_c < 2:
        raise ConfigError("model.M_c", "must be at least 2")
    if m.landmarks > m.M:
        raise ConfigError("model.landmarks", f"landmark count {m.landmarks} exceeds sequence length M={m.M}")
    if m.d % m.heads:
        raise ConfigError("model.heads", f"d={m.d} is not divisible by {m.heads} heads")
    if m.seg_kernel % 2 != 1:
        raise ConfigError("model.seg_kernel", "must be odd")
    if not (m.use_pure_pose or m.use_static):
        raise ConfigError("model.use_static", "cannot remove both the pure-pose and the static branches")
    if len(cfg.weights.delta) != m.N:
        raise ConfigError("weights.delta", f"expected {m.N} values (one per sub-phase), got {len(cfg.weights.delta)}")
    try:
        cfg.score_weights()
    except WeightError as exc:
        path = "weights.delta" if "delta" in str(exc) else "weights.alpha"
        raise ConfigError(path, str(exc)) from None
    try:
        cfg.train_config()
    except ValueError as exc:
        raise ConfigError("train", str(exc)) from None
    if cfg.eval.L < 1:
        raise ConfigError("eval.L", "must be at least 1")
    if any(not 0 < t <= 1 for t in cfg.eval.thresholds):
        raise ConfigError("eval.thresholds", "thresholds must lie in (0, 1]")
    if cfg.synth.train_items < 0 or cfg.synth.test_items < 0:
        raise ConfigError("synth", "item counts must be non-negative")
    if cfg.synth.judge_noise < 0:
        raise ConfigError("synth.judge_noise", "must be non-negative")
    if cfg.synth.image_size < 8:
        raise ConfigError("synth.image_size", "must be at least 8")
    return cfg


def from_dict(data) -> RunConfig:
    return validate(_build(RunConfig, data, ""))


def apply_override(data: dict, assignment: str):
    """Apply ``a.b.c=value`` (value parsed as JSON, else taken as a string) to a raw dict."""
    if "=" not in assignment:
        raise ConfigError(assignment, "override must look like key.path=value")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.strip().split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(key, "override path crosses a non-object value")
    node[parts[-1]] = value
    return data


def load_config(path=None, overrides=(), seed=None) -> RunConfig:
    """Read ``path`` (or $POSEAQA_CONFIG, or built-in defaults) and apply overrides."""
    path = path or os.environ.get(CONFIG_ENV)
    data = {}
    if path:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(str(path), "config file not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(str(path), f"malformed JSON ({exc.msg} at line {exc.lineno})") from None
    for assignment in overrides:
        apply_override(data, assignment)
    if seed is not None:
        data["seed"] = seed
    return from_dict(data)


def write_config(cfg: RunConfig, directory, name="config.effective.json"):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / name
    path.write_text(json.dumps(cfg.to_json(), indent=2) + "\n", encoding="utf-8")
    return path
