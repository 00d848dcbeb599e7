"""
Statistics over run outcomes: consistency, per-dataset strategy rankings,
Friedman and Nemenyi critical-difference analysis, grouped aggregates.
"""
import math
from collections import defaultdict
from itertools import combinations

import numpy as np
from scipy import stats

from ..challenge import welch_p
from ..core import Serializable
from ..errors import InputError, UnsupportedAlpha, UntestableSample
from ..meta.store import MetaKnowledgeBase, total_evaluations
from ..ranking import rank_with_ties
from ..schema import Schema
from ..space.strategies import StrategyLabel
from ..utils._types import *
from ..utils.logs import get_logger
from .search import RunOutcome

logger = get_logger(__name__)

FAILURE_ERROR = 1.0

# Studentized range quantiles divided by sqrt(2), infinite degrees of freedom, K = 2..20
_NEMENYI_Q = {
    0.05: (1.960, 2.344, 2.569, 2.728, 2.850, 2.948, 3.031, 3.102, 3.164, 3.219,
           3.268, 3.313, 3.354, 3.391, 3.426, 3.458, 3.489, 3.517, 3.544),
    0.10: (1.645, 2.052, 2.291, 2.460, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978,
           3.030, 3.077, 3.120, 3.159, 3.196, 3.230, 3.261, 3.291, 3.319),
}
_ASYMPTOTIC_DF = 1e6


def consistency(outcomes: Sequence[RunOutcome], alpha: float = 0.05) -> float:
    """
    Share of run pairs whose best cross-validations are statistically
    indistinguishable (Welch p > alpha). Pairs involving a failed run count
    as distinguishable.
    """
    if len(outcomes) < 2:
        raise InputError("consistency needs at least 2 runs")
    keys = {(o.strategy_label, o.dataset_id) for o in outcomes}
    if len(keys) > 1:
        raise InputError(f"outcomes mix strategy/dataset cells: {sorted(keys)}")

    pairs = list(combinations(outcomes, 2))
    agreeing = 0
    for a, b in pairs:
        if not (a.completed and b.completed):
            continue
        try:
            if welch_p(a.best_cv, b.best_cv) > alpha:
                agreeing += 1
        except UntestableSample:
            continue
    return agreeing / len(pairs)


class StrategyCell(Schema):
    strategy_label: str
    dataset_id: DatasetId
    n_runs: int
    failure_count: int
    consistency: float
    mean_best_error: float


def summarize_runs(
        outcomes: Sequence[RunOutcome],
        alpha: float = 0.05,
        failure_policy: FailurePolicy = "penalize"
) -> List[StrategyCell]:
    """
    One cell per (strategy, dataset), sorted by key. With `penalize` a failed
    run contributes error 1.0 to the mean over runs; with `drop` it is left out
    (a cell whose runs all failed still scores 1.0).
    """
    grouped: Dict[Tuple[str, DatasetId], List[RunOutcome]] = defaultdict(list)
    for outcome in outcomes:
        grouped[(outcome.strategy_label, outcome.dataset_id)].append(outcome)

    cells = []
    for (label, dataset), runs in sorted(grouped.items()):
        runs = sorted(runs, key=lambda o: o.run_index)
        errors = [o.mean_cv_error if o.completed else FAILURE_ERROR for o in runs]
        if failure_policy == "drop":
            errors = [o.mean_cv_error for o in runs if o.completed] or [FAILURE_ERROR]
        cells.append(StrategyCell(
            strategy_label=label,
            dataset_id=dataset,
            n_runs=len(runs),
            failure_count=sum(not o.completed for o in runs),
            consistency=consistency(runs, alpha) if len(runs) > 1 else 0.0,
            mean_best_error=math.fsum(errors) / len(errors)
        ))
    return cells


class StrategyRanking(Schema):
    strategies: List[str]
    datasets: List[DatasetId]
    per_dataset: Dict[DatasetId, Dict[str, float]]
    average: Dict[str, float]

    def order(self) -> List[str]:
        return sorted(self.strategies, key=lambda s: (self.average[s], s))

    def matrix(self) -> np.ndarray:
        """Rank matrix, datasets x strategies."""
        return np.array([[self.per_dataset[d][s] for s in self.strategies] for d in self.datasets])


def rank_strategies(
        cells: Sequence[StrategyCell],
        datasets: Optional[Sequence[DatasetId]] = None
) -> StrategyRanking:
    """
    Tie-averaged ranks of strategies by mean best error on every dataset,
    averaged across datasets.
    """
    table: Dict[DatasetId, Dict[str, float]] = defaultdict(dict)
    for cell in cells:
        table[cell.dataset_id][cell.strategy_label] = cell.mean_best_error
    strategies = sorted({c.strategy_label for c in cells})
    datasets = sorted(table) if datasets is None else sorted(datasets)
    if not strategies or not datasets:
        raise InputError("no strategy results to rank")

    per_dataset = {}
    for d in datasets:
        missing = [s for s in strategies if s not in table.get(d, {})]
        if missing:
            raise InputError(f"dataset `{d}` lacks results for {', '.join(missing)}")
        per_dataset[d] = dict(zip(strategies, rank_with_ties([table[d][s] for s in strategies])))

    average = {s: math.fsum(per_dataset[d][s] for d in datasets) / len(datasets) for s in strategies}
    return StrategyRanking(strategies=strategies, datasets=datasets, per_dataset=per_dataset, average=average)


def nemenyi_q(n_strategies: int, alpha: float = 0.05) -> float:
    """Critical value q_alpha for `n_strategies` under the Nemenyi test."""
    if alpha not in _NEMENYI_Q:
        raise UnsupportedAlpha(alpha, sorted(_NEMENYI_Q))
    if n_strategies < 2:
        raise InputError(f"Nemenyi test needs at least 2 strategies, got {n_strategies}")
    if n_strategies <= 20:
        return _NEMENYI_Q[alpha][n_strategies - 2]
    q = stats.studentized_range.ppf(1.0 - alpha, n_strategies, _ASYMPTOTIC_DF)
    return float(q / math.sqrt(2.0))


def nemenyi_cd(n_strategies: int, n_datasets: int, alpha: float = 0.05) -> float:
    """Critical difference of average ranks: q_alpha * sqrt(K (K + 1) / (6 N))."""
    if n_datasets < 1:
        raise InputError(f"Nemenyi test needs at least 1 dataset, got {n_datasets}")
    q = nemenyi_q(n_strategies, alpha)
    return q * math.sqrt(n_strategies * (n_strategies + 1) / (6.0 * n_datasets))


class FriedmanResult(Schema):
    chi2: float
    f_stat: Optional[float]
    p_value: Optional[float]


def friedman_test(ranks: np.ndarray) -> FriedmanResult:
    """
    Friedman chi-square over a datasets x strategies rank matrix, with the
    Iman-Davenport F correction and its p-value.
    """
    ranks = np.asarray(ranks, dtype=float)
    n, k = ranks.shape
    if k < 2 or n < 1:
        raise InputError("Friedman test needs >= 2 strategies and >= 1 dataset")
    mean_ranks = ranks.mean(axis=0)
    chi2 = 12.0 * n / (k * (k + 1)) * (float(np.sum(mean_ranks ** 2)) - k * (k + 1) ** 2 / 4.0)
    denominator = n * (k - 1) - chi2
    if n < 2:
        return FriedmanResult(chi2=chi2, f_stat=None, p_value=None)
    if denominator <= 0:
        return FriedmanResult(chi2=chi2, f_stat=None, p_value=0.0)
    f_stat = (n - 1) * chi2 / denominator
    p_value = float(stats.f.sf(f_stat, k - 1, (k - 1) * (n - 1)))
    return FriedmanResult(chi2=chi2, f_stat=f_stat, p_value=p_value)


def nemenyi_pairs(average: Mapping[str, float], cd: float) -> List[Tuple[str, str]]:
    """Strategy pairs whose average-rank gap exceeds the critical difference."""
    names = sorted(average, key=lambda s: (average[s], s))
    return [(a, b) for a, b in combinations(names, 2) if abs(average[a] - average[b]) > cd]


def cd_groups(average: Mapping[str, float], cd: float) -> List[List[str]]:
    """
    Maximal runs of consecutive strategies (by average rank) whose spread is
    within the critical difference: the bars of a critical-difference diagram.
    """
    names = sorted(average, key=lambda s: (average[s], s))
    spans = []
    for i in range(len(names)):
        j = i
        while j + 1 < len(names) and average[names[j + 1]] - average[names[i]] <= cd:
            j += 1
        if j > i and not any(lo <= i and j <= hi for lo, hi in spans):
            spans.append((i, j))
    return [names[lo:hi + 1] for lo, hi in spans]


class NemenyiResult(Serializable):
    alpha: float
    cd: float
    n_strategies: int
    n_datasets: int
    average_ranks: Dict[str, float]
    significant_pairs: List[Tuple[str, str]]
    groups: List[List[str]]
    friedman: Optional[FriedmanResult] = None


def nemenyi_analysis(ranking: StrategyRanking, alpha: float = 0.05) -> NemenyiResult:
    """Critical difference, significant pairs, groups and Friedman statistics."""
    cd = nemenyi_cd(len(ranking.strategies), len(ranking.datasets), alpha)
    return NemenyiResult(
        alpha=alpha,
        cd=cd,
        n_strategies=len(ranking.strategies),
        n_datasets=len(ranking.datasets),
        average_ranks=ranking.average,
        significant_pairs=nemenyi_pairs(ranking.average, cd),
        groups=cd_groups(ranking.average, cd),
        friedman=friedman_test(ranking.matrix())
    )


class AggregateRow(Schema):
    grouping: str
    group: str
    n_strategies: int
    mean_consistency: float
    mean_failures: float
    mean_rank: float
    rank_variance: float


def _group_keys(label: StrategyLabel) -> Dict[str, Optional[str]]:
    is_meta = label.family in ("O", "M", "L")
    return {
        "strategy_type": label.strategy_type,
        "base": str(label.base_index or 1) if is_meta else None,
        "k": str(label.k) if label.k is not None else None,
    }


def aggregate_report(
        cells: Sequence[StrategyCell],
        ranking: StrategyRanking,
        groupings: Sequence[str] = ("strategy_type", "base", "k")
) -> List[AggregateRow]:
    """
    Average consistency, failures and average rank per strategy, then per group
    of strategies sharing a type, a base index or a k. `rank_variance` is the
    population variance of the members' per-dataset ranks. Controls only appear in
    the type grouping; random culling has no base.
    """
    per_strategy: Dict[str, List[StrategyCell]] = defaultdict(list)
    for cell in cells:
        per_strategy[cell.strategy_label].append(cell)

    rows = []
    for grouping in groupings:
        members: Dict[str, List[str]] = defaultdict(list)
        for label in sorted(per_strategy):
            key = _group_keys(StrategyLabel.parse(label)).get(grouping)
            if key is not None:
                members[key].append(label)
        for group in sorted(members, key=lambda g: (len(g), g)):
            labels = members[group]
            consistencies = [math.fsum(c.consistency for c in per_strategy[s]) / len(per_strategy[s]) for s in labels]
            failures = [math.fsum(c.failure_count for c in per_strategy[s]) / len(per_strategy[s]) for s in labels]
            ranks = [ranking.average[s] for s in labels]
            rows.append(AggregateRow(
                grouping=grouping,
                group=group,
                n_strategies=len(labels),
                mean_consistency=math.fsum(consistencies) / len(labels),
                mean_failures=math.fsum(failures) / len(labels),
                mean_rank=math.fsum(ranks) / len(labels),
                rank_variance=float(np.var([ranking.per_dataset[d][s] for s in labels for d in ranking.datasets]))
            ))
    return rows


def partition_by_tractability(base: MetaKnowledgeBase, threshold: int = 1000) -> Dict[str, List[DatasetId]]:
    """
    Split datasets into `lightweight` (more than `threshold` recorded single-fold
    evaluations) and `heavyweight`.
    """
    partition: Dict[str, List[DatasetId]] = {"lightweight": [], "heavyweight": []}
    for d in base.datasets:
        key = "lightweight" if total_evaluations(base, d) > threshold else "heavyweight"
        partition[key].append(d)
    return partition


class TopHalfRow(Schema):
    strategy_label: str
    partition: str
    n_datasets: int
    fraction: Optional[float]


def top_half_fractions(ranking: StrategyRanking, partitions: Mapping[str, Sequence[DatasetId]]) -> List[TopHalfRow]:
    """Share of each partition's datasets on which a strategy ranks in the top half."""
    half = len(ranking.strategies) / 2.0
    rows = []
    for name in sorted(partitions):
        datasets = [d for d in partitions[name] if d in ranking.per_dataset]
        for s in ranking.strategies:
            hits = sum(ranking.per_dataset[d][s] <= half for d in datasets)
            rows.append(TopHalfRow(
                strategy_label=s,
                partition=name,
                n_datasets=len(datasets),
                fraction=hits / len(datasets) if datasets else None
            ))
    return rows


def sign_test(xs: Sequence[float], ys: Sequence[float]) -> float:
    """
    One-sided binomial sign test of "xs tends to be smaller than ys". Ties are
    discarded; with no untied pair the p-value is 1.
    """
    if len(xs) != len(ys):
        raise InputError("sign test needs paired samples")
    wins = sum(x < y for x, y in zip(xs, ys))
    untied = sum(x != y for x, y in zip(xs, ys))
    if untied == 0:
        return 1.0
    return float(stats.binomtest(wins, untied, 0.5, alternative="greater").pvalue)


def seed_means(outcomes: Sequence[RunOutcome]) -> Dict[str, List[float]]:
    """
    Per strategy, the error of each run index averaged over datasets, failed
    runs counting as 1.0. Lists are ordered by run index, so two strategies run
    with the same seeds pair up for `sign_test`.
    """
    grouped: Dict[str, Dict[int, List[float]]] = defaultdict(lambda: defaultdict(list))
    for o in outcomes:
        grouped[o.strategy_label][o.run_index].append(o.mean_cv_error if o.completed else FAILURE_ERROR)
    return {
        label: [math.fsum(runs[i]) / len(runs[i]) for i in sorted(runs)]
        for label, runs in sorted(grouped.items())
    }
