import json

import numpy as np
import pytest

from conftest import same_difficulty_pairs
from poseaqa.pipeline import PairResult, PipelineError, mmp, prepare_video
from poseaqa.posedata import PHASE_NAMES, synth_corpus


def test_self_comparison_returns_query_score(small_corpus, make_models):
    models = make_models(1)
    for v in small_corpus[:6]:
        r = mmp(models, v, v)
        assert r.sd_total == 0.0
        assert r.predicted == v.score


@pytest.mark.parametrize("seed", range(50))
def test_swapping_roles_negates_sd_total_exactly(seed, small_corpus, make_models):
    models = make_models(seed)
    pairs = same_difficulty_pairs(small_corpus)
    q, e = pairs[np.random.default_rng(seed).integers(len(pairs))]
    fwd, bwd = mmp(models, q, e), mmp(models, e, q)
    assert fwd.sd_total == -bwd.sd_total
    assert fwd.breakdown.predicted_raw - e.score == -(bwd.breakdown.predicted_raw - q.score)


def test_ground_truth_keyframes_reproduce_generator_phases(small_corpus, make_models):
    q, e = same_difficulty_pairs(small_corpus)[0]
    r = mmp(make_models(), q, e, keyframe_source="ground_truth")
    assert r.K_Q == q.gt_keyframes and r.K_E == e.gt_keyframes
    assert r.aligned[0].query_pose.shape == (16, 29)


def test_staged_json_lists_every_stage(small_corpus, make_models):
    q, e = same_difficulty_pairs(small_corpus)[0]
    out = mmp(make_models(), q, e, keep_features=True).to_json()
    assert list(out["stages"]) == list(PHASE_NAMES) + ["condition"]
    for name in PHASE_NAMES:
        assert set(out["stages"][name]) == {"pose", "static_pose", "appearance", "static_appearance"}
    assert set(out["stages"]["condition"]) == {"condition", "static_condition"}
    assert len(out["features_query"]["pose"]) == 3
    json.dumps(out)


def test_pair_result_round_trips(small_corpus, make_models):
    q, e = same_difficulty_pairs(small_corpus)[1]
    r = mmp(make_models(2), q, e)
    back = PairResult.from_json(json.loads(json.dumps(r.to_json())))
    assert back.breakdown == r.breakdown and back.K_Q == r.K_Q and back.K_E == r.K_E
    assert back.to_json() == r.to_json()


def test_different_difficulties_rejected_with_stage(small_corpus, make_models):
    a = small_corpus[0]
    b = next(v for v in small_corpus if v.difficulty != a.difficulty)
    with pytest.raises(PipelineError) as exc:
        mmp(make_models(), a, b)
    assert exc.value.stage == "pair"


def test_unknown_keyframe_source_and_missing_truth(small_corpus, make_models):
    q, e = same_difficulty_pairs(small_corpus)[0]
    with pytest.raises(PipelineError, match="segment"):
        mmp(make_models(), q, e, keyframe_source="oracle")
    bare = type(q)(q.id, q.difficulty, q.score, q.pose, q.descriptors, None)
    with pytest.raises(PipelineError, match="no ground-truth"):
        mmp(make_models(), bare, e, keyframe_source="ground_truth")


def test_prepare_rejects_short_videos():
    v = synth_corpus(1, 0, seed=0)[0]
    v.pose = v.pose[:3]
    with pytest.raises(PipelineError, match="need at least 4"):
        prepare_video(v)


def test_model_checkpoint_round_trip(tmp_path, small_corpus, make_models):
    q, e = same_difficulty_pairs(small_corpus)[2]
    a = make_models(3)
    a.save(tmp_path / "m.dpw")
    b = make_models(4)
    b.load(tmp_path / "m.dpw")
    assert mmp(a, q, e).to_json() == mmp(b, q, e).to_json()
