import math

import numpy as np
import pytest

from conftest import make_base
from metareduce.errors import InputError, UndefinedCorrelation
from metareduce.ranking import (
    build_ranking,
    correlate,
    cross_base_correlations,
    leaderboard_excluding,
    rank_distribution,
    rank_with_ties,
)


def test_rank_with_ties_averages_spanned_ranks():
    assert rank_with_ties([0.1, 0.2, 0.2, 0.4]) == [1.0, 2.5, 2.5, 4.0]
    assert rank_with_ties([0.3, 0.3, 0.3]) == [2.0, 2.0, 2.0]
    with pytest.raises(InputError):
        rank_with_ties([])


def test_rank_sums_are_triangular():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 15))
        # Coarse values so that ties are frequent
        values = list(rng.integers(0, 5, n) / 4)
        assert sum(rank_with_ties(values)) == pytest.approx(n * (n + 1) / 2, abs=1e-9)


def test_sample_orders_and_leaderboard(automl_base, sample_manifest):
    table = build_ranking(automl_base)
    for d, order in sample_manifest.planted_orders.items():
        assert table.order_for(d) == order
    assert table.leaderboard_order() == sample_manifest.planted_leaderboard
    assert [e.position for e in table.leaderboard] == list(range(1, 9))
    assert table.leaderboard[0].avg_rank == pytest.approx(3.8)
    assert table.leaderboard[-1].avg_rank == pytest.approx(5.2)


def test_penalty_cells_rank_last(default_base, sample_manifest):
    (dataset, predictor), = sample_manifest.penalty_cells["default"]
    table = build_ranking(default_base)
    assert table.ranks_for(dataset)[predictor] == len(table.predictors)
    assert table.top_k(3) == ["P2", "P3", "P4"]


def test_rank_key_best_uses_best_error():
    base = make_base({
        "d1": {"A": [0.10, 0.50], "B": [0.25, 0.26]},
        "d2": {"A": [0.10, 0.50], "B": [0.25, 0.26]},
    }, folds=2)
    assert build_ranking(base, key="mean").leaderboard_order() == ["B", "A"]
    assert build_ranking(base, key="best").leaderboard_order() == ["A", "B"]


def test_pipeline_filter_changes_the_ranking(automl_base):
    single = build_ranking(automl_base, "single_only")
    multi = build_ranking(automl_base, "multi_only")
    assert single.pipeline_filter.value == "single_only"
    # Cells with a single configuration have no multi-component records
    penalties = [
        (d, p) for d in automl_base.datasets for p in automl_base.predictors
        if multi.per_dataset_mean[d][p] == 1.0
    ]
    assert penalties
    assert all(single.per_dataset_mean[d][p] < 1.0 for d, p in penalties)


def test_leaderboard_excluding_holds_out_a_dataset():
    base = make_base({
        "d1": {"A": [0.1, 0.1], "B": [0.2, 0.2], "C": [0.3, 0.3]},
        "d2": {"A": [0.3, 0.3], "B": [0.1, 0.1], "C": [0.2, 0.2]},
        "d3": {"A": [0.3, 0.3], "B": [0.2, 0.2], "C": [0.1, 0.1]},
    }, folds=2)
    assert build_ranking(base).leaderboard_order() == ["B", "C", "A"]
    assert leaderboard_excluding(base, "d3") == ["B", "A", "C"]
    single = make_base({"d1": {"A": [0.1, 0.1], "B": [0.2, 0.2]}}, folds=2)
    with pytest.raises(InputError):
        leaderboard_excluding(single, "d1")


def test_spearman_on_rank_pearson_on_values():
    assert correlate([1, 2, 3, 4, 5], [2, 1, 4, 3, 5], "spearman") == pytest.approx(0.8)
    assert correlate([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
    assert correlate([1, 2, 3], [1, 4, 100], "spearman") == pytest.approx(1.0)
    with pytest.raises(UndefinedCorrelation):
        correlate([1, 1, 1], [1, 2, 3])
    with pytest.raises(InputError):
        correlate([1, 2], [1, 2, 3])


def test_cross_base_correlations(automl_base, default_base, sample_manifest):
    report = cross_base_correlations(automl_base, default_base)
    assert [row.dataset_id for row in report.rows] == sample_manifest.datasets
    for row in report.rows:
        assert row.n_predictors == 8
        assert row.rank_corr > 0.9
        assert row.error_corr > 0.5
    assert report.leaderboard_rank_corr > 0.8

    dropped = cross_base_correlations(automl_base, default_base, drop_penalty_cells=True)
    sizes = {row.dataset_id: row.n_predictors for row in dropped.rows}
    (dataset, _), = sample_manifest.penalty_cells["default"]
    assert sizes[dataset] == 7
    assert all(n == 8 for d, n in sizes.items() if d != dataset)


def test_cross_base_constant_subset_is_undefined_not_fatal():
    a = make_base({"d1": {"A": [0.2, 0.2], "B": [0.2, 0.2]}}, folds=2, base_id="a")
    b = make_base({"d1": {"A": [0.1, 0.1], "B": [0.3, 0.3]}}, folds=2, base_id="b")
    report = cross_base_correlations(a, b)
    assert report.rows[0].rank_corr is None
    assert report.rows[0].error_corr is None


def test_rank_distribution(automl_base):
    table = build_ranking(automl_base)
    grid = rank_distribution(table)
    assert set(grid) == set(table.predictors)
    assert grid["P0"] == [1.0, 2.0, 8.0, 7.0, 4.0]


@pytest.mark.parametrize("transform", [
    lambda v: math.exp(3 * v),
    lambda v: v ** 3 + v,
    lambda v: 5 * v - 2,
    lambda v: math.log(v + 0.01),
])
def test_ranks_survive_strictly_increasing_transforms(transform):
    rng = np.random.default_rng(7)
    for _ in range(200):
        values = list(rng.integers(0, 8, int(rng.integers(1, 12))) / 8)
        assert rank_with_ties([transform(v) for v in values]) == rank_with_ties(values)


def test_leaderboard_survives_per_dataset_affine_rescaling():
    rng = np.random.default_rng(11)
    predictors = ["A", "B", "C", "D", "E"]
    for _ in range(20):
        errors = {
            f"d{j}": {p: list(rng.uniform(0.1, 0.5, 3)) for p in predictors}
            for j in range(4)
        }
        scales = {d: (rng.uniform(0.5, 1.5), rng.uniform(0.0, 0.2)) for d in errors}
        rescaled = {
            d: {p: [scales[d][0] * e + scales[d][1] for e in folds] for p, folds in row.items()}
            for d, row in errors.items()
        }
        original = build_ranking(make_base(errors, folds=3))
        again = build_ranking(make_base(rescaled, folds=3))
        assert again.leaderboard_order() == original.leaderboard_order()
        assert again.per_dataset_rank == original.per_dataset_rank


@pytest.mark.parametrize("mode", ["pearson", "spearman"])
def test_linear_pairs_correlate_perfectly(mode):
    rng = np.random.default_rng(5)
    for _ in range(100):
        xs = list(rng.uniform(0.0, 1.0, int(rng.integers(2, 20))))
        slope, intercept = rng.uniform(0.1, 10.0), rng.uniform(-5.0, 5.0)
        assert correlate(xs, [slope * x + intercept for x in xs], mode) == pytest.approx(1.0, abs=1e-12)
        assert correlate(xs, [-slope * x + intercept for x in xs], mode) == pytest.approx(-1.0, abs=1e-12)
