"""
Run matrix: every (strategy, dataset, seed) cell materializes its reduced
space and runs one seeded search. Cells share no mutable state.
"""
import hashlib
import math

from ..errors import InputError
from ..landmarking import DEFAULT_LANDMARKERS, LandmarkResult, landmark_results, select_landmarkers
from ..meta.store import MetaKnowledgeBase, PipelineFilter
from ..ranking import RankingTable, build_ranking
from ..schema import Schema
from ..space.components import Pipeline, Roster
from ..space.strategies import ReducedSpace, StrategyLabel, apply_strategy
from ..utils._types import *
from ..utils.execution import parallel_map
from ..utils.logs import get_logger
from .search import RunOutcome, RunStatus, SearchBudget, run_constrained_search
from .surface import ResponseModel

logger = get_logger(__name__)


def derive_seed(strategy_label: str, dataset_id: DatasetId, seed: int) -> int:
    """Stable 63-bit seed of one cell, independent of execution order."""
    digest = hashlib.sha256(f"{strategy_label}\x1f{dataset_id}\x1f{seed}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


class MatrixCell(Schema):
    model_config = ConfigDict(frozen=True)

    strategy_label: str
    dataset_id: DatasetId
    run_index: int
    seed: int


class StrategyInputs:
    """
    Read-only inputs shared by every cell: ranking tables per meta-knowledge
    base, leave-one-out landmark results, the roster and prior-best pipelines.

    Args:
        bases (Sequence[MetaKnowledgeBase]): Bases addressed by label index X (1-based).
        roster (Roster): Component kinds for closure and pipeline building.
        pipeline_filter (PipelineFilter): Records entering the rankings.
        key (str): Ranking key, `mean` or `best`.
        landmarker_count (int): Landmarkers per base.
        prior_best (Mapping): Prior-best pipeline per dataset, for `r30`.
    """

    def __init__(
            self,
            bases: Sequence[MetaKnowledgeBase],
            roster: Optional[Roster] = None,
            pipeline_filter: Union[PipelineFilter, str] = PipelineFilter.ALL,
            key: RankKey = "mean",
            landmarker_count: int = DEFAULT_LANDMARKERS,
            prior_best: Optional[Mapping[DatasetId, Pipeline]] = None
    ) -> None:
        if not bases:
            raise InputError("at least one meta-knowledge base is required")
        self.logger = get_logger(self.__class__.__name__)
        self.bases = list(bases)
        self.roster = roster or self.bases[0].roster
        self.tables: List[RankingTable] = [build_ranking(b, pipeline_filter, key) for b in self.bases]
        self.landmarker_count = landmarker_count
        self.prior_best = dict(prior_best or {})
        self._landmarks: Dict[int, Dict[DatasetId, Optional[LandmarkResult]]] = {}

    def _slot(self, label: StrategyLabel) -> int:
        slot = label.base_slot
        if slot >= len(self.bases):
            raise InputError(f"strategy `{label.text}` refers to base {slot + 1}, only {len(self.bases)} given")
        return slot

    def prepare(self, labels: Sequence[StrategyLabel]) -> None:
        """Compute landmark results for every base a landmarked label refers to."""
        for label in labels:
            slot = self._slot(label)
            if label.family == "L" and slot not in self._landmarks:
                base = self.bases[slot]
                landmarkers = select_landmarkers(base, self.landmarker_count)
                self.logger.info(f"Landmarkers of `{base.base_id}`: {', '.join(landmarkers)}")
                self._landmarks[slot] = landmark_results(base, landmarkers)

    def landmark(self, label: StrategyLabel, dataset_id: DatasetId) -> Optional[LandmarkResult]:
        slot = self._slot(label)
        if slot not in self._landmarks:
            self.prepare([label])
        return self._landmarks[slot].get(dataset_id)

    def space(self, label: StrategyLabel, dataset_id: DatasetId, seed: int) -> Optional[ReducedSpace]:
        """Reduced space of a cell, or None when a landmarked label has no recommendation."""
        landmark = None
        if label.family == "L":
            landmark = self.landmark(label, dataset_id)
            if landmark is None:
                return None
        return apply_strategy(
            label,
            self.tables[self._slot(label)],
            landmark_result=landmark,
            rng_seed=seed,
            dataset_id=dataset_id,
            roster=self.roster,
            prior_best=self.prior_best.get(dataset_id)
        )


def prior_best_pipelines(base: MetaKnowledgeBase) -> Dict[DatasetId, Pipeline]:
    """
    Per dataset, the recorded pipeline whose configuration has the lowest
    complete cross-validation error, with every component reset to its
    default configuration. Datasets without a complete cross-validation are left out.
    """
    best: Dict[DatasetId, Tuple[float, Tuple[str, ...]]] = {}
    for d in base.datasets:
        folds: Dict[Tuple[Tuple[str, ...], str], Dict[int, List[float]]] = {}
        for r in base.dataset_records(d):
            if r.ok:
                folds.setdefault((tuple(r.pipeline), r.config_id), {}).setdefault(r.fold_index, []).append(r.error_rate)
        for (structure, config_id), per_fold in sorted(folds.items()):
            if len(per_fold) != base.folds:
                continue
            value = math.fsum(math.fsum(v) / len(v) for v in per_fold.values()) / base.folds
            if d not in best or value < best[d][0]:
                best[d] = (value, structure)
    return {
        d: Pipeline(structure=structure, configs=("default",) * len(structure))
        for d, (_, structure) in sorted(best.items())
    }


def plan_cells(labels: Sequence[str], datasets: Sequence[DatasetId], seeds: Sequence[int]) -> List[MatrixCell]:
    """Cells sorted by (strategy, dataset, run)."""
    if not seeds:
        raise InputError("a run matrix needs at least one seed")
    return [
        MatrixCell(strategy_label=label, dataset_id=d, run_index=i, seed=derive_seed(label, d, s))
        for label in sorted(set(labels))
        for d in sorted(set(datasets))
        for i, s in enumerate(seeds)
    ]


def run_matrix(
        inputs: StrategyInputs,
        surface: ResponseModel,
        labels: Sequence[Union[str, StrategyLabel]],
        datasets: Sequence[DatasetId],
        seeds: Sequence[int],
        budget: SearchBudget,
        workers: int = 1,
        optimizer: Optional[str] = None,
        progress: bool = True,
        **optimizer_kwargs: Any
) -> List[RunOutcome]:
    """
    Run every (strategy, dataset, seed) cell and return the outcomes sorted by
    (strategy, dataset, run index).

    A landmarked strategy on a dataset without a landmark recommendation yields
    failed outcomes.
    """
    parsed = [StrategyLabel.parse(l) if isinstance(l, str) else l for l in labels]
    inputs.prepare(parsed)
    by_text = {label.text: label for label in parsed}
    cells = plan_cells(list(by_text), datasets, seeds)
    logger.info(f"Running {len(cells)} cells ({len(by_text)} strategies x {len(set(datasets))} datasets x {len(seeds)} seeds).")

    def run_cell(cell: MatrixCell) -> RunOutcome:
        space = inputs.space(by_text[cell.strategy_label], cell.dataset_id, cell.seed)
        if space is None:
            return RunOutcome(
                strategy_label=cell.strategy_label,
                dataset_id=cell.dataset_id,
                run_index=cell.run_index,
                seed=cell.seed,
                status=RunStatus.FAILED,
                cost_spent=0.0
            )
        return run_constrained_search(
            space,
            surface,
            budget,
            cell.seed,
            dataset_id=cell.dataset_id,
            run_index=cell.run_index,
            roster=inputs.roster,
            optimizer=optimizer,
            **optimizer_kwargs
        )

    outcomes = parallel_map(run_cell, cells, workers=workers, desc="run matrix", progress=progress)
    failed = sum(not o.completed for o in outcomes)
    logger.info(f"Run matrix finished: {len(outcomes)} runs, {failed} failed.")
    return sorted(outcomes, key=lambda o: (o.strategy_label, o.dataset_id, o.run_index))
