import json
import threading
from dataclasses import dataclass

import numpy as np
import pytest

from conftest import same_difficulty_pairs
from poseaqa.diffcore import Nadam, backward
from poseaqa.trainer import (PairSchedule, TrainConfig, TrainingError, fit, make_optimizer,
                             next_reference, pair_loss, total_loss, train_epoch, validate_pool)


@dataclass
class Item:
    id: str
    difficulty: float = 2.0


def _pool(n, difficulty=2.0):
    return [Item(f"v{i}", difficulty) for i in range(n)]


# ----------------------------------------------------------------------------
# loss


def test_total_loss_examples():
    assert total_loss(0.5, 84.0, 86.0) == 4.5
    assert total_loss(1e-6, 86.0, 86.0) <= 1e-5
    rng = np.random.default_rng(0)
    for _ in range(100):
        asm, xh, xq = rng.uniform(0, 5), rng.uniform(0, 100), rng.uniform(0, 100)
        assert abs(total_loss(asm, xh, xq) - (asm + (xq - xh) ** 2)) < 1e-12


def test_pair_loss_components(small_corpus, make_models):
    q, e = same_difficulty_pairs(small_corpus)[0]
    loss, asm, mse = pair_loss(make_models(), q, e, "ground_truth")
    assert float(asm.data) >= 0 and float(mse.data) >= 0
    assert float(loss.data) == float(asm.data) + float(mse.data)


def test_batched_training_features_match_per_video_scores(small_corpus, make_models):
    from poseaqa.pipeline import mmp
    models = make_models(3)
    q, e = same_difficulty_pairs(small_corpus)[3]
    _, _, mse = pair_loss(models, q, e, "predicted")
    raw = mmp(models, q, e).breakdown.predicted_raw
    assert abs(float(mse.data) - (raw - q.score) ** 2) < 1e-9


# ----------------------------------------------------------------------------
# schedule


def test_two_references_alternate_then_repeat():
    pool = _pool(3)
    sched = PairSchedule(1)
    picks = [next_reference(sched, pool[0], pool).id for _ in range(3)]
    assert sorted(picks[:2]) == ["v1", "v2"]
    assert picks[2] in ("v1", "v2")


def test_pool_of_four_gives_three_distinct_references():
    pool = _pool(4)
    sched = PairSchedule(2)
    for epoch in range(3):
        for q in pool:
            next_reference(sched, q, pool)
    for q in pool:
        assert sched.used[q.id] == {p.id for p in pool} - {q.id}


def test_pool_of_six_covers_every_ordered_pair_once():
    pool = _pool(6)
    sched = PairSchedule(3)
    seen = [(q.id, next_reference(sched, q, pool).id) for _ in range(5) for q in pool]
    assert len(seen) == 30 and len(set(seen)) == 30
    assert all(a != b for a, b in seen)


def test_concurrent_workers_never_double_mark():
    pool = _pool(6)
    sched = PairSchedule(4)
    seen, lock = [], threading.Lock()
    barrier = threading.Barrier(6)

    def worker(q):
        barrier.wait()
        for _ in range(5):
            ref = next_reference(sched, q, pool)
            with lock:
                seen.append((q.id, ref.id))

    # each query hammered by its own worker plus a second worker on the same query
    threads = [threading.Thread(target=worker, args=(q,)) for q in pool]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    expected = {(a.id, b.id) for a in pool for b in pool if a.id != b.id}
    assert len(seen) == 30 and set(seen) == expected


def test_shared_query_across_threads_is_atomic():
    pool = _pool(9)
    sched = PairSchedule(5)
    picks, lock = [], threading.Lock()
    barrier = threading.Barrier(8)

    def worker():
        barrier.wait()
        ref = next_reference(sched, pool[0], pool)
        with lock:
            picks.append(ref.id)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(picks) == sorted(p.id for p in pool[1:])


def test_lonely_items_rejected_at_validation():
    with pytest.raises(TrainingError, match="v0"):
        validate_pool([Item("v0", 1.6), Item("v1", 2.0), Item("v2", 2.0)])
    with pytest.raises(TrainingError, match="at least 2"):
        validate_pool([Item("v0")])
    with pytest.raises(TrainingError, match="no same-difficulty"):
        next_reference(PairSchedule(), Item("v0", 1.6), [Item("v0", 1.6), Item("v1", 2.0)])


# ----------------------------------------------------------------------------
# epochs


def _train_set(small_corpus, n=20):
    """Whole difficulty groups from the training split until at least n videos are taken."""
    groups = {}
    for v in sorted(small_corpus[:20], key=lambda v: v.id):
        groups.setdefault(v.difficulty, []).append(v)
    out = []
    for members in groups.values():
        if len(members) > 1 and len(out) < n:
            out += members
    return out


def test_empty_corpus_rejected(make_models):
    models = make_models()
    with pytest.raises(TrainingError, match="empty"):
        train_epoch(models, make_optimizer(models, TrainConfig()), [], PairSchedule(),
                    np.random.default_rng(0), "ground_truth")


def test_config_validation():
    for bad in ({"lr_other": 0}, {"weight_decay": 0.1}, {"epochs": 0}, {"batch_pairs": 2}):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_loss_decreases_over_five_epochs(small_corpus, make_models, tmp_path):
    data = _train_set(small_corpus)
    history = fit(make_models(0), data, TrainConfig(epochs=5, seed=0), out_dir=tmp_path)
    losses = [m.loss for m in history]
    assert losses[-1] < losses[0]
    lines = (tmp_path / "metrics.jsonl").read_text().splitlines()
    assert [json.loads(l)["epoch"] for l in lines] == [1, 2, 3, 4, 5]
    assert (tmp_path / "model.dpw").exists()


def test_identical_seeds_give_identical_traces(small_corpus, make_models):
    data = _train_set(small_corpus, 8)

    def trace():
        hist = fit(make_models(1), data, TrainConfig(epochs=2, seed=3))
        return [(m.loss, m.asm, m.mse, m.keyframe_source) for m in hist]

    assert trace() == trace()


def test_curriculum_switches_to_predicted_keyframes(small_corpus, make_models):
    data = _train_set(small_corpus, 8)
    hist = fit(make_models(2), data, TrainConfig(epochs=2, seed=0, switch_asm=1e9))
    assert [m.keyframe_source for m in hist] == ["ground_truth", "predicted"]
    hist = fit(make_models(2), data, TrainConfig(epochs=2, seed=0, switch_asm=0.0))
    assert [m.keyframe_source for m in hist] == ["ground_truth", "ground_truth"]


def test_small_step_decreases_pair_loss(small_corpus, make_models):
    models = make_models(5)
    q, e = same_difficulty_pairs(small_corpus)[0]
    before, _, _ = pair_loss(models, q, e, "ground_truth")
    models.zero_grad()
    backward(before)
    opt = Nadam([(models.parameters(), 1e-5)])
    opt.step()
    after, _, _ = pair_loss(models, q, e, "ground_truth")
    assert float(after.data) < float(before.data)


def test_non_finite_loss_names_pair(small_corpus, make_models):
    models = make_models(6)
    data = _train_set(small_corpus, 6)
    models.head.regressors["pose"].g.layers[0].weight.data[...] = np.nan
    with pytest.raises(TrainingError, match=r"non-finite loss on pair \(dive_"):
        train_epoch(models, make_optimizer(models, TrainConfig()), data, PairSchedule(),
                    np.random.default_rng(0), "ground_truth")


def test_learning_rate_groups(make_models):
    models = make_models()
    opt = make_optimizer(models, TrainConfig())
    (backbone, lr_b), (other, lr_o) = opt.groups
    assert (lr_b, lr_o) == (1e-4, 1e-3)
    assert {p.name for p in backbone} | {p.name for p in other} == {p.name for p in models.parameters()}
    assert all(p.name.startswith(("seg.", "app.dyn", "cond.dyn")) for p in backbone)
