"""
Per-dataset predictor rankings, the cross-dataset leaderboard and
correlations between ranking sources.
"""
import math

import numpy as np
from scipy import stats

from .errors import InputError, UndefinedCorrelation, UnknownIdentifier
from .meta.store import MetaKnowledgeBase, PipelineFilter, aggregate
from .schema import Schema
from .utils._types import *
from .utils.logs import get_logger

logger = get_logger(__name__)

CorrelationMode = Literal["pearson", "spearman"]


class LeaderboardEntry(Schema):
    predictor_id: PredictorId
    avg_rank: float
    position: int


class RankingTable(Schema):
    """
    Tie-averaged ranks (1 = best) of every roster predictor on every dataset,
    with the leaderboard ordered by mean rank across datasets.
    """
    base_id: str
    pipeline_filter: PipelineFilter = PipelineFilter.ALL
    key: RankKey = "mean"
    predictors: List[PredictorId]
    datasets: List[DatasetId]
    per_dataset_rank: Dict[DatasetId, Dict[PredictorId, float]]
    per_dataset_mean: Dict[DatasetId, Dict[PredictorId, float]]
    leaderboard: List[LeaderboardEntry]

    def ranks_for(self, dataset_id: DatasetId) -> Dict[PredictorId, float]:
        if dataset_id not in self.per_dataset_rank:
            raise UnknownIdentifier("dataset", dataset_id)
        return self.per_dataset_rank[dataset_id]

    def means_for(self, dataset_id: DatasetId) -> Dict[PredictorId, float]:
        if dataset_id not in self.per_dataset_mean:
            raise UnknownIdentifier("dataset", dataset_id)
        return self.per_dataset_mean[dataset_id]

    def order_for(self, dataset_id: DatasetId) -> List[PredictorId]:
        """Predictors of a dataset, best rank first, ties by id."""
        ranks = self.ranks_for(dataset_id)
        return sorted(ranks, key=lambda p: (ranks[p], p))

    def leaderboard_order(self) -> List[PredictorId]:
        return [entry.predictor_id for entry in self.leaderboard]

    def top_k(self, k: int, dataset_id: Optional[DatasetId] = None) -> List[PredictorId]:
        """Best `k` predictors of a dataset, or of the leaderboard when no dataset is given."""
        order = self.order_for(dataset_id) if dataset_id is not None else self.leaderboard_order()
        return order[:k]


def rank_with_ties(values: Sequence[float]) -> List[float]:
    """
    Ascending ranks where equal values share the mean of the ranks they span.

    Examples:
        >>> rank_with_ties([0.1, 0.2, 0.2, 0.4])
        [1.0, 2.5, 2.5, 4.0]
    """
    if len(values) == 0:
        raise InputError("cannot rank an empty list")
    return [float(r) for r in stats.rankdata(np.asarray(values, dtype=float), method="average")]


def _cell_value(base: MetaKnowledgeBase, dataset: DatasetId, predictor: PredictorId,
                pipeline_filter: PipelineFilter, key: RankKey) -> float:
    cell = aggregate(base, dataset, predictor, pipeline_filter)
    return cell.best_error if key == "best" else cell.mean_error


def build_ranking(
        base: MetaKnowledgeBase,
        pipeline_filter: Union[PipelineFilter, str] = PipelineFilter.ALL,
        key: RankKey = "mean",
        datasets: Optional[Sequence[DatasetId]] = None
) -> RankingTable:
    """
    Rank the full roster on every dataset (penalty cells included) and build
    the leaderboard.

    Args:
        base (MetaKnowledgeBase): Source base.
        pipeline_filter (PipelineFilter): Which records enter the cell means.
        key (str): `mean` ranks by mean single-fold error, `best` by best error.
        datasets (Sequence): Restrict ranking to these datasets.

    Returns:
        RankingTable: Ranks, means and leaderboard.
    """
    pipeline_filter = PipelineFilter(pipeline_filter)
    predictors = base.predictors
    if datasets is None:
        datasets = base.datasets
    else:
        for d in datasets:
            base.check_dataset(d)
        datasets = sorted(set(datasets))

    per_rank: Dict[DatasetId, Dict[PredictorId, float]] = {}
    per_mean: Dict[DatasetId, Dict[PredictorId, float]] = {}
    for d in datasets:
        values = [_cell_value(base, d, p, pipeline_filter, key) for p in predictors]
        per_mean[d] = dict(zip(predictors, values))
        per_rank[d] = dict(zip(predictors, rank_with_ties(values)))

    averages = {
        p: (math.fsum(per_rank[d][p] for d in datasets) / len(datasets) if datasets else 0.0)
        for p in predictors
    }
    ordered = sorted(predictors, key=lambda p: (averages[p], p))
    leaderboard = [
        LeaderboardEntry(predictor_id=p, avg_rank=averages[p], position=i)
        for i, p in enumerate(ordered, start=1)
    ]
    logger.debug(f"Ranked {len(predictors)} predictors over {len(datasets)} datasets of `{base.base_id}`.")

    return RankingTable(
        base_id=base.base_id,
        pipeline_filter=pipeline_filter,
        key=key,
        predictors=predictors,
        datasets=list(datasets),
        per_dataset_rank=per_rank,
        per_dataset_mean=per_mean,
        leaderboard=leaderboard
    )


def leaderboard_excluding(
        base: MetaKnowledgeBase,
        held_out: DatasetId,
        pipeline_filter: Union[PipelineFilter, str] = PipelineFilter.ALL,
        key: RankKey = "mean"
) -> List[PredictorId]:
    """
    Leaderboard built from every dataset except `held_out`, so that a global
    recommendation never sees the dataset it is applied to.
    """
    base.check_dataset(held_out)
    if len(base.dataset_universe) < 2:
        raise InputError("a held-out leaderboard needs at least 2 datasets")
    others = [d for d in base.datasets if d != held_out]
    return build_ranking(base, pipeline_filter, key, datasets=others).leaderboard_order()


def correlate(xs: Sequence[float], ys: Sequence[float], mode: CorrelationMode = "pearson") -> float:
    """
    Pearson product-moment correlation, or Pearson on tie-averaged ranks for
    `spearman`.

    Raises:
        InputError: Lengths differ or fewer than 2 values.
        UndefinedCorrelation: Either vector is constant.
    """
    if len(xs) != len(ys):
        raise InputError(f"correlation needs equal lengths, got {len(xs)} and {len(ys)}")
    if len(xs) < 2:
        raise InputError("correlation needs at least 2 values")
    if mode not in ("pearson", "spearman"):
        raise InputError(f"unknown correlation mode `{mode}`")

    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelation("constant input vector")
    if mode == "spearman":
        x = stats.rankdata(x, method="average")
        y = stats.rankdata(y, method="average")
        if np.ptp(x) == 0 or np.ptp(y) == 0:
            raise UndefinedCorrelation("constant rank vector")
    return float(stats.pearsonr(x, y)[0])


class CorrelationRow(Schema):
    dataset_id: DatasetId
    rank_corr: Optional[float]
    error_corr: Optional[float]
    subset_label: str
    n_predictors: int


class CrossBaseReport(Schema):
    base_a: str
    base_b: str
    subset_label: str
    rows: List[CorrelationRow]
    leaderboard_rank_corr: Optional[float]


def _safe_correlate(xs: Sequence[float], ys: Sequence[float], mode: CorrelationMode, where: str) -> Optional[float]:
    try:
        return correlate(xs, ys, mode)
    except (UndefinedCorrelation, InputError) as e:
        logger.warning(f"{mode} correlation undefined for {where}: {e.message}")
        return None


def cross_base_correlations(
        base_a: MetaKnowledgeBase,
        base_b: MetaKnowledgeBase,
        predictor_subset: Optional[Sequence[PredictorId]] = None,
        subset_label: str = "all",
        drop_penalty_cells: bool = False,
        pipeline_filter: Union[PipelineFilter, str] = PipelineFilter.ALL
) -> CrossBaseReport:
    """
    Per shared dataset, correlate the two bases' predictor means (Pearson) and
    rankings (Spearman) over a predictor subset, plus the leaderboards' rank
    correlation.

    Args:
        predictor_subset (Sequence): Predictors to compare; defaults to the
            predictors both bases know.
        subset_label (str): Label written to the report rows.
        drop_penalty_cells (bool): Leave out predictors unevaluated in either base.
    """
    shared = sorted(base_a.predictor_universe & base_b.predictor_universe)
    subset = sorted(set(predictor_subset)) if predictor_subset is not None else shared
    for p in subset:
        if p not in base_a.predictor_universe or p not in base_b.predictor_universe:
            raise UnknownIdentifier("predictor", p)
    if len(subset) < 2:
        raise InputError(f"predictor subset `{subset_label}` needs at least 2 predictors")

    datasets = sorted(base_a.dataset_universe & base_b.dataset_universe)
    table_a = build_ranking(base_a, pipeline_filter)
    table_b = build_ranking(base_b, pipeline_filter)

    rows = []
    for d in datasets:
        members = subset
        if drop_penalty_cells:
            members = [
                p for p in subset
                if not aggregate(base_a, d, p, pipeline_filter).is_penalty
                and not aggregate(base_b, d, p, pipeline_filter).is_penalty
            ]
        means_a = [table_a.per_dataset_mean[d][p] for p in members]
        means_b = [table_b.per_dataset_mean[d][p] for p in members]
        rows.append(CorrelationRow(
            dataset_id=d,
            rank_corr=_safe_correlate(means_a, means_b, "spearman", d),
            error_corr=_safe_correlate(means_a, means_b, "pearson", d),
            subset_label=subset_label,
            n_predictors=len(members)
        ))

    avg_a = {e.predictor_id: e.avg_rank for e in table_a.leaderboard}
    avg_b = {e.predictor_id: e.avg_rank for e in table_b.leaderboard}
    leaderboard_corr = _safe_correlate(
        [avg_a[p] for p in subset], [avg_b[p] for p in subset], "spearman", "leaderboard"
    )
    return CrossBaseReport(
        base_a=base_a.base_id,
        base_b=base_b.base_id,
        subset_label=subset_label,
        rows=rows,
        leaderboard_rank_corr=leaderboard_corr
    )


def rank_distribution(table: RankingTable) -> Dict[PredictorId, List[float]]:
    """Per predictor, its rank on each dataset in `table.datasets` order."""
    return {p: [table.per_dataset_rank[d][p] for d in table.datasets] for p in table.predictors}
