import math

import numpy as np
import pytest
from scipy import stats

from conftest import make_base
from metareduce.errors import InputError, UnsupportedAlpha
from metareduce.harness.analysis import (
    StrategyCell,
    aggregate_report,
    cd_groups,
    consistency,
    friedman_test,
    nemenyi_analysis,
    nemenyi_cd,
    nemenyi_pairs,
    nemenyi_q,
    partition_by_tractability,
    rank_strategies,
    seed_means,
    sign_test,
    summarize_runs,
    top_half_fractions,
)
from metareduce.harness.search import RunOutcome, RunStatus
from metareduce.space.components import Pipeline

AGREEING_CV = [0.10, 0.12, 0.11, 0.13, 0.09]


def _outcome(cv=None, run=0, label="M-k4", dataset="d1"):
    if cv is None:
        return RunOutcome(
            strategy_label=label, dataset_id=dataset, run_index=run, seed=run,
            status=RunStatus.FAILED, cost_spent=50.0
        )
    return RunOutcome(
        strategy_label=label, dataset_id=dataset, run_index=run, seed=run,
        status=RunStatus.COMPLETED, best_cv=list(cv),
        best_pipeline=Pipeline(structure=("P0",), configs=("default",)), cost_spent=50.0
    )


def _shifted(shift):
    return [e + shift for e in AGREEING_CV]


@pytest.mark.parametrize("agreeing, expected", [(2, 0.1), (3, 0.3), (4, 0.6), (5, 1.0)])
def test_consistency_counts_agreeing_pairs(agreeing, expected):
    cvs = [AGREEING_CV] * agreeing + [_shifted(0.2 * (i + 1)) for i in range(5 - agreeing)]
    outcomes = [_outcome(cv, run=i) for i, cv in enumerate(cvs)]
    assert consistency(outcomes) == pytest.approx(expected)


def test_consistency_with_failures():
    outcomes = [_outcome(AGREEING_CV, run=0), _outcome(AGREEING_CV, run=1)] + [_outcome(run=i) for i in range(2, 5)]
    assert consistency(outcomes) == pytest.approx(0.1)
    assert consistency([_outcome(run=i) for i in range(5)]) == 0.0
    with pytest.raises(InputError):
        consistency([_outcome(AGREEING_CV)])
    with pytest.raises(InputError):
        consistency([_outcome(AGREEING_CV), _outcome(AGREEING_CV, run=1, dataset="d2")])


def test_summarize_runs_failure_policies():
    outcomes = [
        _outcome([0.1] * 2 + [0.1], run=0),
        _outcome([0.2, 0.2, 0.2], run=1),
        _outcome([0.3, 0.3, 0.3], run=2),
        _outcome(run=3),
        _outcome(run=0, label="R-k4"),
    ]
    penalized = summarize_runs(outcomes)
    assert [(c.strategy_label, c.dataset_id) for c in penalized] == [("M-k4", "d1"), ("R-k4", "d1")]
    assert penalized[0].mean_best_error == pytest.approx(0.4)
    assert penalized[0].failure_count == 1
    assert penalized[0].n_runs == 4
    assert penalized[1].consistency == 0.0

    dropped = summarize_runs(outcomes, failure_policy="drop")
    assert dropped[0].mean_best_error == pytest.approx(0.2)
    assert dropped[1].mean_best_error == 1.0


def _cell(label, dataset, error):
    return StrategyCell(
        strategy_label=label, dataset_id=dataset, n_runs=5,
        failure_count=0, consistency=0.5, mean_best_error=error
    )


def test_rank_strategies_averages_tied_ranks():
    cells = [
        _cell("A", "d1", 0.1), _cell("B", "d1", 0.2), _cell("C", "d1", 0.2),
        _cell("A", "d2", 0.3), _cell("B", "d2", 0.1), _cell("C", "d2", 0.2),
    ]
    ranking = rank_strategies(cells)
    assert ranking.per_dataset["d1"] == {"A": 1.0, "B": 2.5, "C": 2.5}
    assert ranking.average == {"A": 2.0, "B": 1.75, "C": 2.25}
    assert ranking.order() == ["B", "A", "C"]
    assert ranking.matrix().shape == (2, 3)
    with pytest.raises(InputError):
        rank_strategies(cells[:-1])


@pytest.mark.parametrize("alpha", [0.05, 0.10])
def test_nemenyi_table_matches_studentized_range(alpha):
    for k in range(2, 21):
        exact = stats.studentized_range.ppf(1 - alpha, k, np.inf) / math.sqrt(2)
        assert nemenyi_q(k, alpha) == round(float(exact), 3)


def test_nemenyi_critical_values():
    assert nemenyi_cd(4, 10) == pytest.approx(nemenyi_q(4) * math.sqrt(20 / 60))
    beyond = stats.studentized_range.ppf(0.95, 25, np.inf) / math.sqrt(2)
    assert nemenyi_q(25) == pytest.approx(beyond, rel=1e-4)
    assert nemenyi_q(20) < nemenyi_q(25) < 4.0
    with pytest.raises(UnsupportedAlpha):
        nemenyi_q(4, alpha=0.01)
    with pytest.raises(InputError):
        nemenyi_q(1)
    with pytest.raises(InputError):
        nemenyi_cd(3, 0)


def test_friedman_matches_scipy_without_ties():
    rng = np.random.default_rng(3)
    ranks = np.array([rng.permutation(4) + 1 for _ in range(12)], dtype=float)
    result = friedman_test(ranks)
    expected = stats.friedmanchisquare(*ranks.T)
    assert result.chi2 == pytest.approx(expected.statistic)
    assert 0.0 <= result.p_value <= 1.0


def test_friedman_degenerate_cases():
    unanimous = friedman_test(np.array([[1, 2, 3]] * 5))
    assert unanimous.chi2 == pytest.approx(10.0)
    assert unanimous.f_stat is None
    assert unanimous.p_value == 0.0
    single = friedman_test(np.array([[1, 2, 3]]))
    assert single.p_value is None


def test_pairs_and_groups():
    average = {"A": 1.0, "B": 1.5, "C": 3.0, "D": 3.2}
    assert nemenyi_pairs(average, 1.0) == [("A", "C"), ("A", "D"), ("B", "C"), ("B", "D")]
    assert cd_groups(average, 1.0) == [["A", "B"], ["C", "D"]]
    assert cd_groups({"A": 1.0, "B": 1.8, "C": 2.6}, 1.0) == [["A", "B"], ["B", "C"]]
    assert cd_groups({"A": 1.0, "B": 3.0}, 1.0) == []


def test_nemenyi_analysis():
    cells = [_cell(s, d, e) for d in ("d1", "d2", "d3") for s, e in (("O-k4", 0.1), ("M-k4", 0.2), ("baseline", 0.3))]
    result = nemenyi_analysis(rank_strategies(cells))
    assert result.average_ranks == {"M-k4": 2.0, "O-k4": 1.0, "baseline": 3.0}
    assert result.cd == pytest.approx(2.344 * math.sqrt(12 / 18))
    assert result.significant_pairs == [("O-k4", "baseline")]
    assert result.friedman.p_value == 0.0


def test_aggregate_report_groups():
    labels = ["O1-k4", "M1-k4", "M2-k8", "R-k4", "baseline"]
    cells = [_cell(s, "d1", 0.1 * (i + 1)) for i, s in enumerate(labels)]
    rows = aggregate_report(cells, rank_strategies(cells))
    by_key = {(r.grouping, r.group): r for r in rows}
    assert by_key[("strategy_type", "leaderboard")].n_strategies == 2
    assert by_key[("strategy_type", "baseline")].mean_rank == 5.0
    assert by_key[("base", "1")].n_strategies == 2
    assert by_key[("base", "2")].n_strategies == 1
    assert ("base", "random") not in by_key
    assert by_key[("k", "4")].n_strategies == 3
    assert by_key[("k", "4")].mean_rank == pytest.approx(2.0 + 1.0 / 3.0)
    assert by_key[("k", "4")].rank_variance == pytest.approx(14 / 9)
    assert by_key[("strategy_type", "baseline")].rank_variance == 0.0


def test_partition_and_top_half():
    base = make_base({
        "big": {"A": [0.1] * 10, "B": [0.2] * 10},
        "small": {"A": [0.1] * 10, "B": [0.2, None, None, None, None, None, None, None, None, None]},
    })
    assert partition_by_tractability(base, threshold=15) == {"lightweight": ["big"], "heavyweight": ["small"]}
    assert partition_by_tractability(base) == {"lightweight": [], "heavyweight": ["big", "small"]}

    cells = [
        _cell("A", "big", 0.1), _cell("B", "big", 0.2), _cell("C", "big", 0.3), _cell("D", "big", 0.4),
        _cell("A", "small", 0.4), _cell("B", "small", 0.1), _cell("C", "small", 0.2), _cell("D", "small", 0.3),
    ]
    rows = top_half_fractions(rank_strategies(cells), {"lightweight": ["big"], "heavyweight": ["small"], "empty": []})
    fractions = {(r.partition, r.strategy_label): r.fraction for r in rows}
    assert fractions[("lightweight", "A")] == 1.0
    assert fractions[("heavyweight", "A")] == 0.0
    assert fractions[("heavyweight", "C")] == 1.0
    assert fractions[("empty", "A")] is None


def test_sign_test():
    assert sign_test([0.1] * 10, [0.2] * 10) == pytest.approx(0.5 ** 10)
    assert sign_test([0.2, 0.2], [0.2, 0.2]) == 1.0
    assert sign_test([0.3] * 10, [0.2] * 10) == pytest.approx(1.0)
    with pytest.raises(InputError):
        sign_test([0.1], [0.1, 0.2])


def test_seed_means_pairs_runs_across_datasets():
    outcomes = [
        _outcome([0.1, 0.1], run=1, dataset="d1"),
        _outcome([0.3, 0.3], run=1, dataset="d2"),
        _outcome([0.2, 0.2], run=0, dataset="d1"),
        _outcome(run=0, dataset="d2"),
        _outcome([0.4, 0.4], run=0, dataset="d1", label="R-k4"),
    ]
    means = seed_means(outcomes)
    assert list(means) == ["M-k4", "R-k4"]
    assert means["M-k4"] == pytest.approx([0.6, 0.2])
    assert means["R-k4"] == pytest.approx([0.4])
