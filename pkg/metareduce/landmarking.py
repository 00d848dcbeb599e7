"""
Relative landmarking: characterize a dataset by the errors of a few cheap
predictors and recommend from the prior dataset whose landmark errors
correlate best with it.
"""
import math
from collections import defaultdict

from .errors import DegeneratePriors, InputError, MalformedLabel, UndefinedCorrelation, UnsolvableProfile
from .meta.store import MetaKnowledgeBase, aggregate
from .ranking import RankingTable, correlate
from .schema import Schema
from .space.components import Roster
from .space.strategies import ReducedSpace, apply_strategy, close_dependencies
from .utils._types import *
from .utils.logs import get_logger

logger = get_logger(__name__)

DEFAULT_LANDMARKERS = 5


class LandmarkProfile(Schema):
    dataset_id: DatasetId
    landmarker_ids: List[PredictorId]
    errors: List[float]
    total_landmark_cost: float = Field(ge=0.0)
    unsolvable: bool = False

    @model_validator(mode="after")
    def _aligned(self) -> "LandmarkProfile":
        if len(self.errors) != len(self.landmarker_ids):
            raise ValueError("errors must align with landmarker_ids")
        if any(not 0.0 <= e <= 1.0 for e in self.errors):
            raise ValueError("landmark errors must lie in [0, 1]")
        return self


class LandmarkResult(Schema):
    dataset_id: DatasetId
    most_similar: DatasetId
    coefficient: float
    landmark_cost: float = Field(ge=0.0)
    landmarker_ids: List[PredictorId] = Field(default_factory=list)


def select_landmarkers(base: MetaKnowledgeBase, count: int = DEFAULT_LANDMARKERS) -> List[PredictorId]:
    """
    The `count` predictors with the lowest mean evaluation time, averaged over
    every ok evaluation that contains them; ties broken by id.
    """
    if count < 1:
        raise InputError(f"landmarker count must be >= 1, got {count}")
    times: Dict[PredictorId, List[float]] = defaultdict(list)
    for record in base.records:
        if not record.ok:
            continue
        for component in dict.fromkeys(record.pipeline):
            if component in base.predictor_universe:
                times[component].append(record.eval_time)

    candidates = sorted(times, key=lambda p: (math.fsum(times[p]) / len(times[p]), p))
    if count > len(candidates):
        raise InputError(
            f"{count} landmarkers requested but only {len(candidates)} predictors were ever evaluated"
        )
    return candidates[:count]


def landmark_profile(
        base: MetaKnowledgeBase,
        dataset_id: DatasetId,
        landmarkers: Sequence[PredictorId]
) -> LandmarkProfile:
    """
    Landmark error vector of a dataset. Unevaluated landmarkers carry the 1.0
    penalty; a profile made only of penalties is flagged unsolvable. The cost is
    one full cross-validation of every landmarker at its recorded per-fold time.
    """
    base.check_dataset(dataset_id)
    cells = [aggregate(base, dataset_id, p) for p in landmarkers]
    return LandmarkProfile(
        dataset_id=dataset_id,
        landmarker_ids=list(landmarkers),
        errors=[c.mean_error for c in cells],
        total_landmark_cost=math.fsum(c.mean_eval_time * base.folds for c in cells),
        unsolvable=all(c.is_penalty for c in cells)
    )


def most_similar_dataset(
        new_profile: LandmarkProfile,
        prior_profiles: Sequence[LandmarkProfile]
) -> Tuple[DatasetId, float]:
    """
    Prior dataset whose landmark errors have the highest Pearson correlation
    with the new profile; ties broken by dataset id.

    Raises:
        UnsolvableProfile: The new profile holds penalties only.
        UndefinedCorrelation: The new profile is constant.
        DegeneratePriors: No prior profile could be correlated.
    """
    if new_profile.unsolvable:
        raise UnsolvableProfile(new_profile.dataset_id)
    if len(set(new_profile.errors)) < 2:
        raise UndefinedCorrelation(f"landmark profile of `{new_profile.dataset_id}` is constant")

    scored: List[Tuple[float, DatasetId]] = []
    for prior in prior_profiles:
        if prior.landmarker_ids != new_profile.landmarker_ids:
            raise InputError(f"prior `{prior.dataset_id}` uses different landmarkers")
        if prior.unsolvable:
            logger.warning(f"Skipping unsolvable prior profile `{prior.dataset_id}`.")
            continue
        try:
            scored.append((correlate(new_profile.errors, prior.errors, "pearson"), prior.dataset_id))
        except UndefinedCorrelation:
            logger.warning(f"Skipping constant prior profile `{prior.dataset_id}`.")

    if not scored:
        raise DegeneratePriors(new_profile.dataset_id)
    coefficient, dataset_id = min(scored, key=lambda item: (-item[0], item[1]))
    return dataset_id, coefficient


def landmark_results(
        base: MetaKnowledgeBase,
        landmarkers: Sequence[PredictorId],
        datasets: Optional[Sequence[DatasetId]] = None
) -> Dict[DatasetId, Optional[LandmarkResult]]:
    """
    Leave-one-out similarity: each dataset is matched against every other
    dataset of the base. Unsolvable or degenerate datasets map to None.
    """
    datasets = list(datasets) if datasets is not None else base.datasets
    profiles = {d: landmark_profile(base, d, landmarkers) for d in datasets}
    results: Dict[DatasetId, Optional[LandmarkResult]] = {}
    for d in datasets:
        priors = [profiles[o] for o in datasets if o != d]
        try:
            similar, coefficient = most_similar_dataset(profiles[d], priors)
        except (UnsolvableProfile, DegeneratePriors, UndefinedCorrelation) as e:
            logger.warning(f"No landmark recommendation for `{d}`: {e.message}")
            results[d] = None
            continue
        results[d] = LandmarkResult(
            dataset_id=d,
            most_similar=similar,
            coefficient=coefficient,
            landmark_cost=profiles[d].total_landmark_cost,
            landmarker_ids=list(landmarkers)
        )
    return results


def recommend_landmarked_space(
        base: MetaKnowledgeBase,
        new_profile: LandmarkProfile,
        ranking_table: RankingTable,
        k: int,
        roster: Optional[Roster] = None,
        label: Optional[str] = None
) -> ReducedSpace:
    """
    Reduced space holding the `k` best predictors of the prior dataset most
    similar to `new_profile`, with the landmark cost attached for budget deduction.

    Prior profiles are built from `base` for every dataset of `ranking_table`
    other than the new one. With `k` equal to the roster size the full roster is
    returned without matching, so constant or unsolvable profiles are accepted.
    """
    text = label or f"L-k{k}"
    n_predictors = len(ranking_table.predictors)
    if not 1 <= k <= n_predictors:
        raise MalformedLabel(text, f"k={k} outside [1, {n_predictors}]")
    if k == n_predictors:
        order = ranking_table.leaderboard_order()
        _, added = close_dependencies(order, order, roster or Roster.plain(order))
        logger.info(f"`{new_profile.dataset_id}` keeps the full roster at k={k}.")
        return ReducedSpace(
            strategy_label=text,
            dataset_id=new_profile.dataset_id,
            predictor_pool=order,
            k_requested=k,
            closure_added=added,
            landmark_cost=new_profile.total_landmark_cost,
            provenance="full roster"
        )

    priors = [
        landmark_profile(base, d, new_profile.landmarker_ids)
        for d in ranking_table.datasets
        if d != new_profile.dataset_id
    ]
    similar, coefficient = most_similar_dataset(new_profile, priors)
    result = LandmarkResult(
        dataset_id=new_profile.dataset_id,
        most_similar=similar,
        coefficient=coefficient,
        landmark_cost=new_profile.total_landmark_cost,
        landmarker_ids=new_profile.landmarker_ids
    )
    logger.info(f"`{new_profile.dataset_id}` is most similar to `{similar}` (r={coefficient:.4f}).")
    return apply_strategy(
        text,
        ranking_table,
        landmark_result=result,
        dataset_id=new_profile.dataset_id,
        roster=roster
    )
