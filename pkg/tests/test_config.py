import json

import pytest

from poseaqa.config import (CONFIG_ENV, ConfigError, RunConfig, apply_override, from_dict, load_config,
                            write_config)


def test_defaults_validate():
    cfg = load_config()
    assert cfg.weights.alpha == 0.7 and cfg.weights.beta == 0.3 and cfg.eval.L == 5
    assert (cfg.model.J, cfg.model.U, cfg.model.Y, cfg.model.N) == (12, 4, 8, 3)
    assert cfg.score_weights().delta == (0.30, 0.55, 0.15)


@pytest.mark.parametrize("data, path", [
    ({"modle": {}}, "modle"),
    ({"model": {"dd": 4}}, "model.dd"),
    ({"model": {"d": "big"}}, "model.d"),
    ({"model": {"d": 30, "heads": 4}}, "model.heads"),
    ({"model": {"landmarks": 20}}, "model.landmarks"),
    ({"weights": {"alpha": 0.6}}, "weights.alpha"),
    ({"weights": {"delta": [0.5, 0.5]}}, "weights.delta"),
    ({"weights": {"delta": [0.5, 0.6, -0.1]}}, "weights.delta"),
    ({"train": {"weight_decay": 0.1}}, "train"),
    ({"eval": {"L": 0}}, "eval.L"),
    ({"model": {"use_pure_pose": False, "use_static": False}}, "model.use_static"),
])
def test_invalid_configs_name_the_field(data, path):
    with pytest.raises(ConfigError) as info:
        from_dict(data)
    assert info.value.path == path


def test_overrides_and_seed(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"seed": 3, "model": {"d": 16}}))
    cfg = load_config(f, ["model.landmarks=4", "weights.delta=[0.2,0.6,0.2]", "paths.output_dir=out"], seed=9)
    assert (cfg.seed, cfg.model.d, cfg.model.landmarks, cfg.paths.output_dir) == (9, 16, 4, "out")
    assert cfg.weights.delta == [0.2, 0.6, 0.2]
    with pytest.raises(ConfigError):
        apply_override({}, "no_equals_sign")


def test_environment_variable_supplies_default_path(tmp_path, monkeypatch):
    f = tmp_path / "env.json"
    f.write_text(json.dumps({"eval": {"L": 3}}))
    monkeypatch.setenv(CONFIG_ENV, str(f))
    assert load_config().eval.L == 3


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(bad)


def test_effective_config_round_trip(tmp_path):
    cfg = load_config(None, ["model.d=16", "train.epochs=3"], seed=4)
    path = write_config(cfg, tmp_path)
    again = load_config(path)
    assert again == cfg and isinstance(again, RunConfig)
    assert again.model_config() == cfg.model_config() and again.train_config() == cfg.train_config()
