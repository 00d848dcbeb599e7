"""
Budgeted, simulated pipeline search over a reduced space.
"""
import math
from enum import Enum

import numpy as np

from ..schema import Schema
from ..space.components import Pipeline, Roster
from ..space.strategies import ReducedSpace
from ..utils._types import *
from ..utils.logs import get_logger
from .optimizers import build_optimizer
from .surface import ResponseModel

logger = get_logger(__name__)

MAX_PROPOSALS = 100_000


class RunStatus(str, Enum):
    COMPLETED = "completed"
    FAILED = "failed"


class SearchBudget(Schema):
    """
    Abstract cost units for one run. Recorded evaluation seconds map one to one
    onto cost units.
    """
    total_cost: float = Field(gt=0.0)
    landmark_deduction: float = Field(default=0.0, ge=0.0)
    runs_per_strategy: int = Field(default=5, ge=1)
    folds: int = Field(default=10, ge=2)


class RunOutcome(Schema):
    strategy_label: str
    dataset_id: DatasetId
    run_index: int = Field(ge=0)
    seed: int
    status: RunStatus
    best_cv: Optional[List[float]] = None
    best_pipeline: Optional[Pipeline] = None
    best_predictor: Optional[PredictorId] = None
    cost_spent: float = Field(ge=0.0)
    n_evaluations: int = Field(default=0, ge=0)
    n_invalid: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _cv_iff_completed(self) -> "RunOutcome":
        if self.status is RunStatus.COMPLETED:
            if not self.best_cv or self.best_pipeline is None:
                raise ValueError("completed run needs best_cv and best_pipeline")
            if any(not 0.0 <= e <= 1.0 for e in self.best_cv):
                raise ValueError("fold errors must lie in [0, 1]")
        elif self.best_cv is not None:
            raise ValueError("failed run carries no best_cv")
        return self

    @property
    def completed(self) -> bool:
        return self.status is RunStatus.COMPLETED

    @property
    def mean_cv_error(self) -> Optional[float]:
        return math.fsum(self.best_cv) / len(self.best_cv) if self.best_cv else None


def run_constrained_search(
        space: ReducedSpace,
        surface: ResponseModel,
        budget: SearchBudget,
        seed: int,
        dataset_id: Optional[DatasetId] = None,
        run_index: int = 0,
        roster: Optional[Roster] = None,
        optimizer: Optional[str] = None,
        max_proposals: int = MAX_PROPOSALS,
        **optimizer_kwargs: Any
) -> RunOutcome:
    """
    Run one seeded search over the pipelines whose scored predictor is in the
    space's pool, paying the surface's cost for every fold until the budget,
    net of landmark costs, is spent.

    Invalid proposals are skipped for free when the space filters validity and
    charged `surface.invalid_cost` otherwise.

    Args:
        space (ReducedSpace): Space to search.
        surface (ResponseModel): Errors and costs.
        budget (SearchBudget): Cost budget and fold count.
        seed (int): Seed of the run's generator; the outcome is a function of
            (space, surface, budget, seed).
        dataset_id (str): Target dataset, defaults to `space.dataset_id`.
        run_index (int): Index written to the outcome.
        roster (Roster): Component kinds used to build pipelines.
        optimizer (str): Optimizer registry key; defaults to the surface's.
        max_proposals (int): Hard cap on proposals.

    Returns:
        RunOutcome: Best full cross-validation found, or a failed outcome.
    """
    dataset_id = dataset_id or space.dataset_id
    if dataset_id is None:
        raise ValueError("run_constrained_search needs a dataset id")

    def outcome(status: RunStatus, spent: float, **fields: Any) -> RunOutcome:
        return RunOutcome(
            strategy_label=space.strategy_label,
            dataset_id=dataset_id,
            run_index=run_index,
            seed=seed,
            status=status,
            cost_spent=spent,
            **fields
        )

    effective = budget.total_cost - budget.landmark_deduction - space.landmark_cost
    if effective <= 0:
        logger.debug(f"{space.strategy_label} on {dataset_id}: landmark cost exhausts the budget.")
        return outcome(RunStatus.FAILED, 0.0)

    rng = np.random.default_rng(seed)
    opt = build_optimizer(optimizer, space, surface, dataset_id, rng, roster=roster, **optimizer_kwargs)

    spent = 0.0
    n_evaluations = n_invalid = 0
    best_cv: Optional[List[float]] = None
    best_mean = math.inf
    best_proposal = None

    for _ in range(max_proposals):
        proposal = opt.ask()

        if rng.random() < surface.invalid_fraction:
            n_invalid += 1
            if space.validity_filter:
                continue
            if spent + surface.invalid_cost > effective:
                spent = effective
                break
            spent += surface.invalid_cost
            continue

        fold_errors: List[float] = []
        exhausted = False
        cost = surface.fold_cost(dataset_id, proposal.predictor_id)
        for fold in range(budget.folds):
            if spent + cost > effective:
                spent, exhausted = effective, True
                break
            spent += cost
            n_evaluations += 1
            error = surface.evaluate_fold(dataset_id, proposal, fold, rng)
            if error is None:
                break
            fold_errors.append(error)

        if len(fold_errors) == budget.folds:
            opt.tell(proposal, fold_errors)
            mean = math.fsum(fold_errors) / budget.folds
            if mean < best_mean:
                best_cv, best_mean, best_proposal = fold_errors, mean, proposal
        if exhausted:
            break

    if best_proposal is None:
        return outcome(RunStatus.FAILED, spent, n_evaluations=n_evaluations, n_invalid=n_invalid)
    return outcome(
        RunStatus.COMPLETED,
        spent,
        best_cv=best_cv,
        best_pipeline=best_proposal.pipeline,
        best_predictor=best_proposal.predictor_id,
        n_evaluations=n_evaluations,
        n_invalid=n_invalid
    )
