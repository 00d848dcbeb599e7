"""
Dataset challenge: skewness of the mean-error distribution, Welch-test
indistinguishability matrices, best-performer groups and the odds that
random culling keeps a top predictor.
"""
import math
from fractions import Fraction

import numpy as np
from scipy import stats

from .errors import InputError, UndefinedChallenge, UntestableSample
from .meta.store import MetaKnowledgeBase, PipelineFilter, aggregate
from .schema import Schema
from .utils._types import *
from .utils.logs import get_logger

logger = get_logger(__name__)

INDISTINGUISHABLE, DISTINGUISHABLE, UNTESTABLE = 1, 0, -1


def skewness(means: Sequence[float]) -> float:
    """
    Position of the mean within the [min, max] range of predictor means:
    (mean - min) / (max - min). Above 0.5 only a few predictors do well.
    """
    if len(means) < 2:
        raise UndefinedChallenge("fewer than 2 means")
    lo, hi = min(means), max(means)
    if hi == lo:
        raise UndefinedChallenge("all means are equal")
    centre = math.fsum(means) / len(means)
    return min(1.0, max(0.0, (centre - lo) / (hi - lo)))


def classify(value: float) -> Literal["hard", "easy", "balanced"]:
    if value > 0.5:
        return "hard"
    if value < 0.5:
        return "easy"
    return "balanced"


def welch_p(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """
    Two-sided Welch t-test p-value.

    Two zero-variance samples give p = 1 when their means agree and p = 0 otherwise.

    Raises:
        UntestableSample: Either sample has fewer than 2 values.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise UntestableSample(f"sample sizes {a.size} and {b.size}, need at least 2 each")

    if np.ptp(a) == 0 and np.ptp(b) == 0:
        return 1.0 if a[0] == b[0] else 0.0
    return float(stats.ttest_ind(a, b, equal_var=False).pvalue)


def is_indistinguishable(p_value: float, alpha: float, rule: AlphaRule = "conventional") -> bool:
    """
    `conventional`: no significant difference when p > alpha.
    `literal`: no significant difference when p > 1 - alpha.
    """
    threshold = alpha if rule == "conventional" else 1.0 - alpha
    return p_value > threshold


class IndistinguishabilityMatrix(Schema):
    dataset_id: DatasetId
    base_id: str
    order: List[PredictorId]
    means: List[float]
    cells: List[List[int]]
    alpha: float = Field(gt=0.0, lt=1.0)
    rule: AlphaRule = "conventional"

    @model_validator(mode="after")
    def _square_symmetric(self) -> "IndistinguishabilityMatrix":
        n = len(self.order)
        if len(self.cells) != n or any(len(row) != n for row in self.cells):
            raise ValueError("cells must be a square matrix over `order`")
        for i in range(n):
            for j in range(i + 1, n):
                if self.cells[i][j] != self.cells[j][i]:
                    raise ValueError("cells must be symmetric")
        return self

    def cell(self, a: PredictorId, b: PredictorId) -> int:
        return self.cells[self.order.index(a)][self.order.index(b)]

    def testable(self, predictor: PredictorId) -> bool:
        i = self.order.index(predictor)
        return self.cells[i][i] != UNTESTABLE


def indistinguishability_matrix(
        base: MetaKnowledgeBase,
        dataset_id: DatasetId,
        alpha: float = 0.05,
        rule: AlphaRule = "conventional",
        pipeline_filter: Union[PipelineFilter, str] = PipelineFilter.ALL
) -> IndistinguishabilityMatrix:
    """
    Pairwise Welch tests between every predictor's pooled single-fold errors on
    a dataset. Predictors are ordered by mean error (ties by id); a predictor
    with fewer than 2 ok evaluations is untestable and its row is -1.
    """
    base.check_dataset(dataset_id)
    predictors = base.predictors
    means = {p: aggregate(base, dataset_id, p, pipeline_filter).mean_error for p in predictors}
    order = sorted(predictors, key=lambda p: (means[p], p))
    samples = {p: base.ok_errors(dataset_id, p, pipeline_filter) for p in order}

    n = len(order)
    cells = [[UNTESTABLE] * n for _ in range(n)]
    for i, a in enumerate(order):
        if len(samples[a]) < 2:
            continue
        cells[i][i] = INDISTINGUISHABLE
        for j in range(i + 1, n):
            b = order[j]
            if len(samples[b]) < 2:
                continue
            p_value = welch_p(samples[a], samples[b])
            value = INDISTINGUISHABLE if is_indistinguishable(p_value, alpha, rule) else DISTINGUISHABLE
            cells[i][j] = cells[j][i] = value

    return IndistinguishabilityMatrix(
        dataset_id=dataset_id,
        base_id=base.base_id,
        order=order,
        means=[means[p] for p in order],
        cells=cells,
        alpha=alpha,
        rule=rule
    )


class PerformerGroups(Schema):
    dataset_id: DatasetId
    groups: List[List[PredictorId]]
    unclassified: List[PredictorId] = Field(default_factory=list)

    @property
    def best_group_size(self) -> int:
        return len(self.groups[0]) if self.groups else 0

    @property
    def second_group_size(self) -> int:
        return len(self.groups[1]) if len(self.groups) > 1 else 0


def best_groups(matrix: IndistinguishabilityMatrix) -> PerformerGroups:
    """
    Greedy sweep over testable predictors in mean-error order. The first
    predictor anchors a group; each next predictor joins the current group when
    it is indistinguishable from that group's anchor and otherwise anchors a new
    group. A predictor that overlaps two adjacent groups therefore lands in the
    later group once it is distinguishable from the earlier anchor.
    Untestable predictors are listed as unclassified.
    """
    groups: List[List[PredictorId]] = []
    unclassified: List[PredictorId] = []
    for predictor in matrix.order:
        if not matrix.testable(predictor):
            unclassified.append(predictor)
            continue
        if groups and matrix.cell(groups[-1][0], predictor) == INDISTINGUISHABLE:
            groups[-1].append(predictor)
        else:
            groups.append([predictor])
    return PerformerGroups(dataset_id=matrix.dataset_id, groups=groups, unclassified=unclassified)


def random_top_hit_probability(
        n_predictors: int,
        group_size: int,
        k: int,
        exact: bool = False
) -> Union[float, Fraction]:
    """
    Probability that a uniform k-subset of the roster keeps at least one member
    of the best group: 1 - C(P - g, k) / C(P, k).
    """
    if not 0 < group_size <= n_predictors:
        raise InputError(f"group size {group_size} outside (0, {n_predictors}]")
    if not 1 <= k <= n_predictors:
        raise InputError(f"k={k} outside [1, {n_predictors}]")
    value = 1 - Fraction(math.comb(n_predictors - group_size, k), math.comb(n_predictors, k))
    return value if exact else float(value)


class ChallengeRow(Schema):
    dataset_id: DatasetId
    skewness_a: Optional[float]
    skewness_b: Optional[float]
    best_group_size: int
    second_group_size: int
    hit_probabilities: Dict[int, Optional[float]]


def _safe_skewness(base: MetaKnowledgeBase, dataset_id: DatasetId, include_penalty: bool) -> Optional[float]:
    cells = [aggregate(base, dataset_id, p) for p in base.predictors]
    means = [c.mean_error for c in cells if include_penalty or not c.is_penalty]
    try:
        return skewness(means)
    except UndefinedChallenge as e:
        logger.warning(f"Skewness of `{dataset_id}` in `{base.base_id}`: {e.message}")
        return None


def challenge_table(
        base_a: MetaKnowledgeBase,
        base_b: Optional[MetaKnowledgeBase],
        k_grid: Sequence[int],
        alpha: float = 0.05,
        rule: AlphaRule = "conventional",
        group_base: Literal["a", "b"] = "b",
        include_penalty: bool = False
) -> List[ChallengeRow]:
    """
    One row per dataset: skewness under both bases, sizes of the best and
    second-best performer groups, and the random-culling hit probability for
    every k.

    Args:
        base_a, base_b: The two bases; `base_b` may be omitted.
        k_grid (Sequence[int]): Pool sizes to report hit probabilities for.
        group_base (str): Which base the performer groups come from (falls back
            to `a` when `base_b` is absent).
        include_penalty (bool): Whether unevaluated predictors enter skewness.
    """
    grouping = base_b if (group_base == "b" and base_b is not None) else base_a
    datasets = base_a.datasets if base_b is None else sorted(base_a.dataset_universe & base_b.dataset_universe)
    n_predictors = len(grouping.predictor_universe)

    rows = []
    for d in datasets:
        groups = best_groups(indistinguishability_matrix(grouping, d, alpha, rule))
        hits = {
            k: (random_top_hit_probability(n_predictors, groups.best_group_size, k)
                if groups.best_group_size and 1 <= k <= n_predictors else None)
            for k in k_grid
        }
        rows.append(ChallengeRow(
            dataset_id=d,
            skewness_a=_safe_skewness(base_a, d, include_penalty),
            skewness_b=_safe_skewness(base_b, d, include_penalty) if base_b is not None else None,
            best_group_size=groups.best_group_size,
            second_group_size=groups.second_group_size,
            hit_probabilities=hits
        ))
    return rows
