import time

import pytest

from poseaqa.gradsuite import TOLERANCES, run_suite

SEEDS = range(20)


@pytest.fixture(scope="module")
def suite():
    start = time.perf_counter()
    results = [r for seed in SEEDS for r in run_suite(seed)]
    return results, time.perf_counter() - start


def test_every_component_is_covered(suite):
    results, _ = suite
    assert {r.component for r in results} == set(TOLERANCES)
    assert len(results) == len(TOLERANCES) * len(SEEDS)


@pytest.mark.parametrize("component", sorted(TOLERANCES))
def test_component_passes_on_every_seed(suite, component):
    results, _ = suite
    failed = [(r.seed, r.worst) for r in results if r.component == component and not r.passed]
    assert not failed, failed


def test_suite_runtime_under_two_minutes(suite):
    assert suite[1] < 120.0
