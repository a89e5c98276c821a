import numpy as np
import pytest

from common import ConfigError, ObservationError
from packages.Constants import GEOMETRY_NAMES, REFERENCE_QUOTAS
from packages.sampling import (BiasedSamplingPlan, biased_quotas, biased_sample, lower_bound, quota_table,
                               uniform_sample, write_quota_table)
from packages.tensor.core import all_cells

CELLS = all_cells((5, 27, 2))


def test_uniform_sample_is_distinct_sorted_and_seeded():
    picked = uniform_sample(CELLS, 100, seed=3)
    assert picked.shape == (100, 3)
    assert len({tuple(c) for c in picked}) == 100
    np.testing.assert_array_equal(picked, uniform_sample(CELLS, 100, seed=3))
    assert not np.array_equal(picked, uniform_sample(CELLS, 100, seed=4))


def test_uniform_sample_edges():
    assert uniform_sample(CELLS, 0, seed=0).shape == (0, 3)
    assert len(uniform_sample(CELLS, 270, seed=0)) == 270
    with pytest.raises(ObservationError):
        uniform_sample(CELLS, 271, seed=0)


@pytest.mark.parametrize("e_num, low", [(1, 3), (2, 5), (10, 21)])
def test_lower_bound(e_num, low):
    assert lower_bound(e_num) == low


@pytest.mark.parametrize("e_num", range(1, 11))
def test_quotas_stay_in_range_for_many_seeds(e_num):
    low = lower_bound(e_num)
    for seed in range(100):
        quotas = biased_quotas(e_num, seed)
        assert len(quotas) == 5
        assert min(quotas) == low
        assert max(quotas) == 40


def test_experiment_one_is_strongly_skewed():
    skewed = sum(1 for seed in range(1000) if max(q := biased_quotas(1, seed)) / min(q) > 3)
    assert skewed >= 900


def test_unknown_experiment_rejected():
    with pytest.raises(ConfigError):
        biased_quotas(11, 0)
    with pytest.raises(ConfigError):
        BiasedSamplingPlan(1, (2, 10, 10, 10, 10))


def test_reference_plan_reproduces_experiment_one():
    plan = BiasedSamplingPlan.reference(1)
    assert list(plan.quotas) == REFERENCE_QUOTAS[1]
    picked = biased_sample(CELLS, 0, plan, seed=0)
    assert len(picked) == 77
    counts = np.bincount(picked[:, 0], minlength=5)
    assert counts.tolist() == [40, 21, 7, 6, 3]


@pytest.mark.parametrize("e_num", range(1, 11))
def test_reference_rows_respect_their_ranges(e_num):
    plan = BiasedSamplingPlan.reference(e_num)
    assert min(plan.quotas) >= plan.lower
    assert max(plan.quotas) == 40


def test_biased_sample_trivial_quotas():
    assert len(biased_sample(CELLS, 0, [0] * 5, seed=1)) == 0
    everything = biased_sample(CELLS, 0, [54] * 5, seed=1)
    assert len(everything) == 270
    with pytest.raises(ObservationError):
        biased_sample(CELLS, 0, [55, 0, 0, 0, 0], seed=1)
    with pytest.raises(ConfigError):
        biased_sample(CELLS, 0, [1, 1, 1], seed=1)


def test_drawn_plan_is_deterministic_and_sample_is_within_slices():
    plan = BiasedSamplingPlan.drawn(3, seed=9)
    assert plan == BiasedSamplingPlan.drawn(3, seed=9)
    picked = biased_sample(CELLS, 0, plan)
    assert np.bincount(picked[:, 0], minlength=5).tolist() == list(plan.quotas)
    assert len({tuple(c) for c in picked}) == len(picked)


def test_quota_table_layout(tmp_path):
    plans = [BiasedSamplingPlan.reference(e) for e in (1, 10)]
    table = quota_table(plans)
    assert list(table.columns) == ["experiment", *GEOMETRY_NAMES, "range"]
    assert table["range"].tolist() == ["[3, 40]", "[21, 40]"]
    path = tmp_path / "quotas.csv"
    write_quota_table(plans, str(path))
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "experiment,Gyroid,Schwarz,Diamond,Lidinoid,Split P,range"
    assert lines[1] == '1,40,21,7,6,3,"[3, 40]"'


def test_distinct_seeds_give_distinct_quota_vectors():
    vectors = {tuple(biased_quotas(1, seed)) for seed in range(100)}
    assert len(vectors) >= 95
