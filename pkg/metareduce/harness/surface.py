"""
Response models answer "what error does this pipeline get on this fold, and
what does a fold cost" for the simulated search.
"""
import math
from abc import ABC, abstractmethod
from collections import defaultdict

import numpy as np

from ..core import Serializable
from ..errors import UnknownIdentifier
from ..meta.store import EvaluationRecord, Flavor, MetaKnowledgeBase, RecordStatus
from ..schema import Schema
from ..space.components import Roster
from ..utils._types import *
from ..utils.logs import get_logger

if TYPE_CHECKING:
    from .optimizers import Proposal


class ResponseModel(ABC):
    """
    Interface of a response model.

    Attributes:
        invalid_fraction (float): Share of proposals that turn out to be invalid pipelines.
        invalid_cost (float): Cost charged for an invalid proposal when no validity
            filter is active.
        default_optimizer (str): Optimizer registry key used when none is requested.
    """
    invalid_fraction: float = 0.0
    invalid_cost: float = 0.0
    default_optimizer: str = "surrogate"

    @abstractmethod
    def fold_cost(self, dataset_id: DatasetId, predictor_id: PredictorId) -> float:
        """Cost of evaluating one fold; always > 0."""

    @abstractmethod
    def evaluate_fold(
            self,
            dataset_id: DatasetId,
            proposal: "Proposal",
            fold: int,
            rng: np.random.Generator
    ) -> Optional[float]:
        """Fold error of a proposal, or None when the predictor cannot produce one."""

    def configs(self, dataset_id: DatasetId, predictor_id: PredictorId) -> List[str]:
        """Recorded configuration ids of a cell, for models that replay records."""
        return []


class SurfaceCell(Schema):
    base_error: float = Field(ge=0.0, le=1.0)
    noise_sigma: float = Field(default=0.01, ge=0.0)
    fold_cost: float = Field(default=1.0, gt=0.0)
    optimum: List[float] = Field(default_factory=lambda: [0.5, 0.5])
    curvature: float = Field(default=1.0, ge=0.0)


class SurfaceManifest(Serializable):
    """
    Planted response surface: per (dataset, predictor) a base error, a
    quadratic bowl over `n_hyperparameters` values in [0, 1], Gaussian fold noise
    and a per-fold cost.
    """
    n_hyperparameters: int = Field(default=2, ge=1)
    folds: int = Field(default=10, ge=2)
    invalid_fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    invalid_cost: float = Field(default=1.0, ge=0.0)
    default_config: float = Field(default=0.5, ge=0.0, le=1.0)
    stall_cost: float = Field(default=1.0, gt=0.0)
    preprocessor_effects: Dict[ComponentId, float] = Field(default_factory=dict)
    cells: Dict[DatasetId, Dict[PredictorId, SurfaceCell]]

    @model_validator(mode="after")
    def _optimum_dims(self) -> "SurfaceManifest":
        for dataset, row in self.cells.items():
            for predictor, cell in row.items():
                if len(cell.optimum) != self.n_hyperparameters:
                    raise ValueError(
                        f"optimum of ({dataset}, {predictor}) has {len(cell.optimum)} values, "
                        f"expected {self.n_hyperparameters}"
                    )
        return self

    @property
    def datasets(self) -> List[DatasetId]:
        return sorted(self.cells)

    @property
    def predictors(self) -> List[PredictorId]:
        return sorted({p for row in self.cells.values() for p in row})

    def to_meta_base(self, base_id: str = "planted", roster: Optional[Roster] = None) -> MetaKnowledgeBase:
        """
        Systematic base holding every planted base error once per fold, i.e.
        exact planted rankings for oracle and leaderboard strategies.
        """
        records = [
            EvaluationRecord(
                base_id=base_id,
                dataset_id=dataset,
                predictor_id=predictor,
                pipeline=(predictor,),
                config_id="planted",
                fold_index=fold,
                error_rate=cell.base_error,
                eval_time=cell.fold_cost,
                status=RecordStatus.OK
            )
            for dataset in self.datasets
            for predictor, cell in sorted(self.cells[dataset].items())
            for fold in range(self.folds)
        ]
        roster = roster or Roster.plain(self.predictors, self.datasets)
        return MetaKnowledgeBase(base_id, Flavor.SYSTEMATIC, records, folds=self.folds, roster=roster)


class ResponseSurface(ResponseModel):
    """Response model backed by a `SurfaceManifest`."""
    default_optimizer = "surrogate"

    def __init__(self, manifest: SurfaceManifest) -> None:
        self.manifest = manifest
        self.invalid_fraction = manifest.invalid_fraction
        self.invalid_cost = manifest.invalid_cost
        self.logger = get_logger(self.__class__.__name__)

    @property
    def n_hyperparameters(self) -> int:
        return self.manifest.n_hyperparameters

    @property
    def default_config(self) -> float:
        return self.manifest.default_config

    def cell(self, dataset_id: DatasetId, predictor_id: PredictorId) -> Optional[SurfaceCell]:
        if dataset_id not in self.manifest.cells:
            raise UnknownIdentifier("dataset", dataset_id)
        return self.manifest.cells[dataset_id].get(predictor_id)

    def fold_cost(self, dataset_id: DatasetId, predictor_id: PredictorId) -> float:
        cell = self.cell(dataset_id, predictor_id)
        return cell.fold_cost if cell is not None else self.manifest.stall_cost

    def expected_error(self, dataset_id: DatasetId, proposal: "Proposal") -> Optional[float]:
        """Noise-free error of a proposal."""
        cell = self.cell(dataset_id, proposal.predictor_id)
        if cell is None:
            return None
        config = np.asarray(proposal.config or [self.default_config] * self.n_hyperparameters, dtype=float)
        bowl = cell.curvature * float(np.sum((config - np.asarray(cell.optimum)) ** 2))
        effects = math.fsum(
            self.manifest.preprocessor_effects.get(c, 0.0) for c in proposal.pipeline.structure[:-1]
        )
        return cell.base_error + bowl + effects

    def evaluate_fold(self, dataset_id, proposal, fold, rng):
        expected = self.expected_error(dataset_id, proposal)
        if expected is None:
            return None
        sigma = self.cell(dataset_id, proposal.predictor_id).noise_sigma
        noise = rng.normal(0.0, sigma) if sigma > 0 else 0.0
        return float(np.clip(expected + noise, 0.0, 1.0))


class RecordedResponse(ResponseModel):
    """
    Response model that replays a meta-knowledge base: a fold of a recorded
    configuration returns its recorded error, anything else draws from the
    cell's recorded errors. Cells without ok records cannot run.

    Args:
        base (MetaKnowledgeBase): Source of recorded evaluations.
        invalid_fraction (float): Share of invalid proposals.
        invalid_cost (float): Cost charged per invalid proposal without validity filtering.
        stall_cost (float): Per-fold cost charged for predictors that cannot run.
        min_fold_cost (float): Lower bound of a fold cost.
    """
    default_optimizer = "replay"

    def __init__(
            self,
            base: MetaKnowledgeBase,
            invalid_fraction: float = 0.0,
            invalid_cost: float = 1.0,
            stall_cost: float = 1.0,
            min_fold_cost: float = 1e-3
    ) -> None:
        self.base = base
        self.invalid_fraction = invalid_fraction
        self.invalid_cost = invalid_cost
        self.stall_cost = stall_cost
        self.min_fold_cost = min_fold_cost
        self.logger = get_logger(self.__class__.__name__)
        self._errors: Dict[Tuple[DatasetId, PredictorId], List[float]] = defaultdict(list)
        self._by_fold: Dict[Tuple[DatasetId, PredictorId, str, int], List[float]] = defaultdict(list)
        self._times: Dict[Tuple[DatasetId, PredictorId], List[float]] = defaultdict(list)
        self._configs: Dict[Tuple[DatasetId, PredictorId], set] = defaultdict(set)
        for record in base.records:
            if not record.ok:
                continue
            key = (record.dataset_id, record.predictor_id)
            self._errors[key].append(record.error_rate)
            self._times[key].append(record.eval_time)
            self._by_fold[(*key, record.config_id, record.fold_index)].append(record.error_rate)
            self._configs[key].add(record.config_id)

    def configs(self, dataset_id, predictor_id):
        return sorted(self._configs.get((dataset_id, predictor_id), ()))

    def fold_cost(self, dataset_id, predictor_id):
        times = self._times.get((dataset_id, predictor_id))
        if not times:
            return self.stall_cost
        return max(self.min_fold_cost, math.fsum(times) / len(times))

    def evaluate_fold(self, dataset_id, proposal, fold, rng):
        key = (dataset_id, proposal.predictor_id)
        pooled = self._errors.get(key)
        if not pooled:
            return None
        recorded = self._by_fold.get((*key, proposal.config_id, fold))
        candidates = recorded if recorded else pooled
        return float(candidates[int(rng.integers(len(candidates)))])
