import pytest

from poseaqa.pipeline import ModelConfig, ModelSet, prepare_video
from poseaqa.posedata import synth_corpus
from poseaqa.scorer import ScoreWeights


@pytest.fixture(scope="session")
def small_corpus():
    """24 prepared synthetic dives (seed 5): 20 train, 4 test."""
    return [prepare_video(v) for v in synth_corpus(20, 4, seed=5)]


@pytest.fixture(scope="session")
def small_config():
    return ModelConfig(d=8, landmarks=4, seg_hidden=8, reg_hidden=8)


@pytest.fixture
def make_models(small_config):
    def make(seed=0, **overrides):
        cfg = ModelConfig(**{**vars(small_config), **overrides})
        return ModelSet(cfg, ScoreWeights(), seed=seed)
    return make


def same_difficulty_pairs(videos):
    by = {}
    for v in videos:
        by.setdefault(v.difficulty, []).append(v)
    return [(a, b) for group in by.values() for a in group for b in group if a.id != b.id]


ACCEPTANCE = []


def record_acceptance(name, passed, detail):
    """Log one acceptance criterion; the lines are repeated in the terminal summary."""
    line = f"ACCEPTANCE {'PASS' if passed else 'FAIL'} | {name} | {detail}"
    print(line)
    ACCEPTANCE.append(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
