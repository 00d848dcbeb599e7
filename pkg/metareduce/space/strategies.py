"""
Configuration-space reduction strategies.

A strategy label names how the predictor pool is culled:

* `OX-kn` oracle: best k predictors previously ranked on the target dataset
* `MX-kn` leaderboard: best k predictors by average rank over all datasets
* `LX-kn` landmarked: best k predictors of the most similar prior dataset
* `R-kn[:seed=s]` random: a seeded uniform k-subset
* `baseline` / `avatar`: the full roster, without / with validity filtering
* `r30`: continue from a supplied prior-best pipeline

`X` selects the meta-knowledge base (1-based) the rankings come from.
"""
import math
import re

import numpy as np

from ..core import Serializable
from ..errors import EmptyPool, InputError, MalformedLabel, MissingLandmarkResult, RosterError
from ..ranking import RankingTable
from ..schema import Schema
from ..utils._types import *
from ..utils.logs import get_logger
from ..utils.registry import Registry
from .components import ComponentKind, DependencyKind, Pipeline, Roster

if TYPE_CHECKING:
    from ..landmarking import LandmarkResult

logger = get_logger(__name__)

StrategyRegistry = Registry("strategies")

CONTROLS = ("baseline", "avatar", "r30")
STRATEGY_TYPES = {
    "O": "oracle",
    "M": "leaderboard",
    "L": "landmarked",
    "R": "random",
    "baseline": "baseline",
    "avatar": "avatar",
    "r30": "r30",
}
_META_LABEL = re.compile(r"^(?P<family>[OML])(?P<base>[1-9]\d*)?-k(?P<k>\d+)$")
_RANDOM_LABEL = re.compile(r"^R(?P<base>[1-9]\d*)?-k(?P<k>\d+)(?::seed=(?P<seed>\d+))?$")


class StrategyLabel(Schema):
    model_config = ConfigDict(frozen=True)

    family: Literal["O", "M", "L", "R", "baseline", "avatar", "r30"]
    base_index: Optional[int] = None
    k: Optional[int] = None
    seed: Optional[int] = None

    @classmethod
    def parse(cls, text: str) -> "StrategyLabel":
        text = text.strip()
        if text in CONTROLS:
            return cls(family=text)
        match = _META_LABEL.match(text)
        if match:
            return cls(
                family=match["family"],
                base_index=int(match["base"]) if match["base"] else None,
                k=int(match["k"])
            )
        match = _RANDOM_LABEL.match(text)
        if match:
            return cls(
                family="R",
                base_index=int(match["base"]) if match["base"] else None,
                k=int(match["k"]),
                seed=int(match["seed"]) if match["seed"] is not None else None
            )
        raise MalformedLabel(text, "expected OX-kn, MX-kn, LX-kn, R-kn[:seed=s], baseline, avatar or r30")

    @property
    def text(self) -> str:
        if self.family in CONTROLS:
            return self.family
        base = "" if self.base_index is None else str(self.base_index)
        seed = "" if self.seed is None else f":seed={self.seed}"
        return f"{self.family}{base}-k{self.k}{seed}"

    @property
    def strategy_type(self) -> str:
        return STRATEGY_TYPES[self.family]

    @property
    def base_slot(self) -> int:
        """0-based index of the base whose rankings feed the strategy."""
        return (self.base_index or 1) - 1

    def __str__(self) -> str:
        return self.text


def parse_labels(text: Union[str, Sequence[str]]) -> List[StrategyLabel]:
    """Parse a comma-separated label list (or a list of labels)."""
    items = text.split(",") if isinstance(text, str) else list(text)
    labels = [StrategyLabel.parse(item) for item in items if item.strip()]
    if not labels:
        raise MalformedLabel(text, "no strategy given")
    return labels


class ReducedSpace(Serializable):
    """
    Output of a strategy: the requested predictor pool plus the predictors
    pulled in to satisfy dependencies.
    """
    strategy_label: str
    dataset_id: Optional[DatasetId] = None
    predictor_pool: List[PredictorId]
    k_requested: int = Field(ge=1)
    closure_added: List[PredictorId] = Field(default_factory=list)
    landmark_cost: float = Field(default=0.0, ge=0.0)
    provenance: str = ""
    validity_filter: bool = True
    prior_best: Optional[Pipeline] = None

    @model_validator(mode="after")
    def _disjoint(self) -> "ReducedSpace":
        if not self.predictor_pool:
            raise ValueError("predictor pool is empty")
        if set(self.closure_added) & set(self.predictor_pool):
            raise ValueError("closure additions overlap the requested pool")
        return self

    @property
    def final_pool(self) -> List[PredictorId]:
        return [*self.predictor_pool, *self.closure_added]

    @property
    def label(self) -> StrategyLabel:
        return StrategyLabel.parse(self.strategy_label)


class StrategyContext(Schema):
    label: StrategyLabel
    ranking_table: RankingTable
    dataset_id: Optional[DatasetId] = None
    landmark_result: Optional[Any] = None
    rng_seed: Optional[int] = None
    prior_best: Optional[Pipeline] = None


class Selection(Schema):
    pool: List[PredictorId]
    closure_order: List[PredictorId]
    provenance: str
    landmark_cost: float = 0.0


def _require_dataset(ctx: StrategyContext) -> DatasetId:
    if ctx.dataset_id is None:
        raise InputError(f"strategy `{ctx.label.text}` needs a target dataset")
    return ctx.dataset_id


@StrategyRegistry.decorator("O")
def _oracle(ctx: StrategyContext) -> Selection:
    dataset = _require_dataset(ctx)
    order = ctx.ranking_table.order_for(dataset)
    return Selection(
        pool=order[:ctx.label.k],
        closure_order=order,
        provenance=f"ranks of `{dataset}` in base `{ctx.ranking_table.base_id}`"
    )


@StrategyRegistry.decorator("M")
def _leaderboard(ctx: StrategyContext) -> Selection:
    order = ctx.ranking_table.leaderboard_order()
    return Selection(
        pool=order[:ctx.label.k],
        closure_order=order,
        provenance=f"leaderboard of base `{ctx.ranking_table.base_id}`"
    )


@StrategyRegistry.decorator("L")
def _landmarked(ctx: StrategyContext) -> Selection:
    result: Optional["LandmarkResult"] = ctx.landmark_result
    if result is None:
        raise MissingLandmarkResult(ctx.label.text, ctx.dataset_id)
    order = ctx.ranking_table.order_for(result.most_similar)
    return Selection(
        pool=order[:ctx.label.k],
        closure_order=order,
        provenance=(
            f"ranks of `{result.most_similar}` (r={result.coefficient:.4f}) "
            f"in base `{ctx.ranking_table.base_id}`"
        ),
        landmark_cost=result.landmark_cost
    )


@StrategyRegistry.decorator("R")
def _random(ctx: StrategyContext) -> Selection:
    seed = ctx.label.seed if ctx.label.seed is not None else ctx.rng_seed
    if seed is None:
        raise InputError(f"random strategy `{ctx.label.text}` needs a seed")
    roster_order = ctx.ranking_table.predictors
    picks = np.random.default_rng(seed).choice(len(roster_order), size=ctx.label.k, replace=False)
    return Selection(
        pool=[roster_order[i] for i in picks],
        closure_order=ctx.ranking_table.leaderboard_order(),
        provenance=f"uniform subset, seed {seed}"
    )


def _full_roster(ctx: StrategyContext) -> Selection:
    order = ctx.ranking_table.leaderboard_order()
    return Selection(pool=order, closure_order=order, provenance="full roster")


StrategyRegistry.register("baseline", _full_roster)
StrategyRegistry.register("avatar", _full_roster)


@StrategyRegistry.decorator("r30")
def _prior_best(ctx: StrategyContext) -> Selection:
    if ctx.prior_best is None:
        raise InputError(f"r30 needs a prior-best pipeline for dataset `{ctx.dataset_id}`")
    return Selection(
        pool=[ctx.prior_best.predictor],
        closure_order=ctx.ranking_table.leaderboard_order(),
        provenance=f"prior-best pipeline {ctx.prior_best.render()}"
    )


def apply_strategy(
        label: Union[str, StrategyLabel],
        ranking_table: RankingTable,
        landmark_result: Optional["LandmarkResult"] = None,
        rng_seed: Optional[int] = None,
        dataset_id: Optional[DatasetId] = None,
        roster: Optional[Roster] = None,
        prior_best: Optional[Pipeline] = None
) -> ReducedSpace:
    """
    Materialize the reduced space a strategy recommends.

    Args:
        label: Strategy label, e.g. `O1-k4` or `R-k4:seed=7`.
        ranking_table (RankingTable): Rankings of the base the label refers to.
        landmark_result (LandmarkResult): Most similar dataset, for `LX-kn`.
        rng_seed (int): Seed for `R-kn` labels that carry none.
        dataset_id (str): Target dataset, for `OX-kn` and reporting.
        roster (Roster): Component kinds and dependencies used for closure.
        prior_best (Pipeline): Prior-best pipeline, for `r30`.

    Returns:
        ReducedSpace: Requested pool, closure additions and provenance.
    """
    if isinstance(label, str):
        label = StrategyLabel.parse(label)
    n_predictors = len(ranking_table.predictors)
    if label.k is not None and not 1 <= label.k <= n_predictors:
        raise MalformedLabel(label.text, f"k={label.k} outside [1, {n_predictors}]")

    ctx = StrategyContext(
        label=label,
        ranking_table=ranking_table,
        dataset_id=dataset_id,
        landmark_result=landmark_result,
        rng_seed=rng_seed,
        prior_best=prior_best
    )
    selection: Selection = StrategyRegistry[label.family](ctx)

    roster = roster or Roster.plain(ranking_table.predictors)
    pool, added = close_dependencies(selection.pool, selection.closure_order, roster)
    space = ReducedSpace(
        strategy_label=label.text,
        dataset_id=dataset_id,
        predictor_pool=selection.pool,
        k_requested=label.k or len(selection.pool),
        closure_added=added,
        landmark_cost=selection.landmark_cost,
        provenance=selection.provenance,
        validity_filter=label.family != "baseline",
        prior_best=prior_best if label.family == "r30" else None
    )
    logger.debug(f"{label.text} on {dataset_id}: pool={space.predictor_pool} closure={added}")
    return space


def _dependency_satisfied(component: PredictorId, members: Sequence[PredictorId], roster: Roster) -> bool:
    spec = roster.get(component)
    if spec is None or spec.dependency is None:
        return True
    if spec.dependency.kind is DependencyKind.NEEDS_BASE_LEARNER:
        return any((m_spec := roster.get(m)) is not None and m_spec.is_plain for m in members)
    return spec.dependency.host in members


def _best_satisfier(
        component: PredictorId,
        members: Sequence[PredictorId],
        ranking_for_closure: Sequence[PredictorId],
        roster: Roster
) -> PredictorId:
    spec = roster[component]
    if spec.dependency.kind is DependencyKind.NEEDS_HOST_PREDICTOR:
        host = spec.dependency.host
        if host not in roster or not roster[host].is_plain:
            raise RosterError(f"host `{host}` of `{component}` is not a plain predictor in the roster")
        return host

    candidates = [*ranking_for_closure, *roster.of_kind(ComponentKind.PREDICTOR)]
    for candidate in candidates:
        candidate_spec = roster.get(candidate)
        if candidate not in members and candidate_spec is not None and candidate_spec.is_plain:
            return candidate
    raise RosterError(f"no plain predictor can serve as base learner for `{component}`")


def close_dependencies(
        pool: Sequence[PredictorId],
        ranking_for_closure: Sequence[PredictorId],
        roster: Roster
) -> Tuple[List[PredictorId], List[PredictorId]]:
    """
    Pull in the best-ranked out-of-pool predictors needed by pool members that
    cannot run on their own: a base learner for a meta-predictor, the host
    predictor for a kernel.

    Args:
        pool (Sequence): Requested pool, in recommendation order.
        ranking_for_closure (Sequence): Predictor preference order, best first.
        roster (Roster): Component kinds and dependencies.

    Returns:
        Tuple: (final pool, closure additions). The final pool is the requested
        pool followed by the additions.

    Raises:
        EmptyPool: The pool is empty.
        RosterError: A dependency has no satisfier in the roster.
    """
    if not pool:
        raise EmptyPool("")

    final = list(dict.fromkeys(pool))
    added: List[PredictorId] = []
    changed = True
    while changed:
        changed = False
        for member in list(final):
            if _dependency_satisfied(member, final, roster):
                continue
            satisfier = _best_satisfier(member, final, ranking_for_closure, roster)
            final.append(satisfier)
            added.append(satisfier)
            changed = True
    return final, added


def space_size(
        roster: Roster,
        max_len: int = 7,
        discretization: Optional[Mapping[str, int]] = None,
        allow_repeats: bool = False
) -> Union[int, str]:
    """
    Count structurally distinct pipelines: a chain of up to `max_len - 1`
    preprocessors followed by one predictor slot.

    Args:
        roster (Roster): Declared components.
        max_len (int): Maximum pipeline length.
        discretization (Mapping): Per-kind number of distinct arrangements of
            one component (e.g. discretized hyperparameter settings); 1 when absent.
            A kernel counts as an extra predictor-slot arrangement of its host.
        allow_repeats (bool): Whether a preprocessor may appear twice in a chain.

    Returns:
        int, or its decimal string when the count reaches 2**63.
    """
    if max_len < 1:
        raise InputError(f"max_len must be >= 1, got {max_len}")
    weights = {kind.value: 1 for kind in ComponentKind}
    weights.update(discretization or {})

    n_pre = len(roster.preprocessors)
    w_pre = weights[ComponentKind.PREPROCESSOR.value]
    chains = 0
    for length in range(max_len):
        arrangements = n_pre ** length if allow_repeats else math.perm(n_pre, length)
        chains += arrangements * w_pre ** length

    slot = sum(
        weights[c.kind.value]
        for c in roster.components
        if c.kind is not ComponentKind.PREPROCESSOR
    )
    total = chains * slot
    return total if total < 2 ** 63 else str(total)
