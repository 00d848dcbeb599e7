"""
Pluggable optimizers for the simulated search. An optimizer proposes a
pipeline and configuration, and is told the fold errors of every proposal
that completed a full cross-validation.
"""
import math
from abc import ABC, abstractmethod

import numpy as np

from ..schema import Schema
from ..space.components import ComponentKind, Pipeline, Roster
from ..space.strategies import ReducedSpace
from ..utils._types import *
from ..utils.logs import get_logger
from ..utils.registry import Registry
from .surface import ResponseModel

OptimizerRegistry = Registry("optimizers")

DEFAULT_CONFIG = "default"


class Proposal(Schema):
    """
    A pipeline to evaluate. `predictor_id` is the pool member whose response is
    scored; for a kernel it differs from the pipeline's final host predictor.
    """
    model_config = ConfigDict(frozen=True)

    predictor_id: PredictorId
    pipeline: Pipeline
    config: Tuple[float, ...] = ()
    config_id: str = DEFAULT_CONFIG


class Optimizer(ABC):
    """
    Random search with greedy exploitation of the incumbent.

    The first `init_per_predictor * |pool|` proposals cycle through the pool in
    a seeded random order with fresh configurations. Afterwards, with
    probability `exploit_probability` the incumbent predictor is proposed again
    with a perturbed configuration, otherwise a random pool member with a fresh one.

    Args:
        space (ReducedSpace): Space to search; the pool after closure is searched.
        surface (ResponseModel): Response model, consulted for recorded configurations.
        dataset_id (str): Target dataset.
        rng (np.random.Generator): Generator owned by the run.
        roster (Roster): Component kinds, used to build valid pipeline structures.
        init_per_predictor (int): Initial proposals per pool member.
        exploit_probability (float): Chance of exploiting the incumbent.
        max_chain (int): Longest preprocessor chain drawn in front of a predictor.
    """

    def __init__(
            self,
            space: ReducedSpace,
            surface: ResponseModel,
            dataset_id: DatasetId,
            rng: np.random.Generator,
            roster: Optional[Roster] = None,
            init_per_predictor: int = 2,
            exploit_probability: float = 0.8,
            max_chain: int = 2
    ) -> None:
        self.logger = get_logger(self.__class__.__name__)
        self.space = space
        self.surface = surface
        self.dataset_id = dataset_id
        self.rng = rng
        self.roster = roster or Roster.plain(space.final_pool)
        self.members = [space.prior_best.predictor] if space.prior_best is not None else list(space.final_pool)
        self.exploit_probability = exploit_probability
        self.max_chain = max_chain
        self.n_initial = init_per_predictor * len(self.members)
        self.initial_order = [self.members[i] for i in rng.permutation(len(self.members))]
        self.preprocessors = self.roster.preprocessors
        self.plain_members = [
            m for m in self.members if (spec := self.roster.get(m)) is None or spec.is_plain
        ]
        self.n_asked = 0
        self.incumbent: Optional[Proposal] = None
        self.incumbent_error = math.inf

    @abstractmethod
    def _sample_config(self, predictor_id: PredictorId) -> Tuple[Tuple[float, ...], str]:
        """Fresh configuration as (hyperparameter vector, config id)."""

    @abstractmethod
    def _perturb_config(self, proposal: Proposal) -> Tuple[Tuple[float, ...], str]:
        """Configuration near the one of `proposal`."""

    @abstractmethod
    def _default_config(self, predictor_id: PredictorId) -> Tuple[Tuple[float, ...], str]:
        """Configuration with default hyperparameter values."""

    def _structure(self, member: PredictorId) -> Tuple[List[ComponentId], List[str], str]:
        """
        Pipeline structure around a pool member: a random preprocessor chain,
        then the member (a kernel runs inside its host, a meta-predictor wraps a
        base learner drawn from the plain pool members).
        """
        spec = self.roster.get(member)
        kind = spec.kind if spec is not None else ComponentKind.PREDICTOR
        chain: List[ComponentId] = []
        if self.preprocessors and self.max_chain > 0:
            length = int(self.rng.integers(0, min(self.max_chain, len(self.preprocessors)) + 1))
            if length:
                picks = self.rng.choice(len(self.preprocessors), size=length, replace=False)
                chain = [self.preprocessors[i] for i in picks]

        if kind is ComponentKind.KERNEL:
            return chain + [spec.dependency.host], [DEFAULT_CONFIG] * len(chain), f"kernel={member}"
        if kind is ComponentKind.META_PREDICTOR and self.plain_members:
            learner = self.plain_members[int(self.rng.integers(len(self.plain_members)))]
            return chain + [learner, member], [DEFAULT_CONFIG] * (len(chain) + 1), ""
        return chain + [member], [DEFAULT_CONFIG] * len(chain), ""

    def _proposal(self, member: PredictorId, config: Tuple[float, ...], config_id: str) -> Proposal:
        prior = self.space.prior_best
        if prior is not None:
            configs = list(prior.configs[:-1]) + [config_id]
            pipeline = Pipeline(structure=prior.structure, configs=tuple(configs), max_len=prior.max_len)
        else:
            structure, configs, prefix = self._structure(member)
            final = f"{prefix};{config_id}" if prefix else config_id
            pipeline = Pipeline(structure=tuple(structure), configs=tuple(configs + [final]))
        return Proposal(predictor_id=member, pipeline=pipeline, config=config, config_id=config_id)

    def ask(self) -> Proposal:
        """Next proposal."""
        step = self.n_asked
        self.n_asked += 1

        if self.space.prior_best is not None and step == 0:
            member = self.members[0]
            return self._proposal(member, *self._default_config(member))

        if step < self.n_initial or self.incumbent is None:
            member = self.initial_order[step % len(self.initial_order)]
            return self._proposal(member, *self._sample_config(member))

        if self.rng.random() < self.exploit_probability:
            return self._proposal(self.incumbent.predictor_id, *self._perturb_config(self.incumbent))

        member = self.members[int(self.rng.integers(len(self.members)))]
        return self._proposal(member, *self._sample_config(member))

    def tell(self, proposal: Proposal, fold_errors: Sequence[float]) -> None:
        """Record the result of a completed cross-validation."""
        mean = math.fsum(fold_errors) / len(fold_errors)
        if mean < self.incumbent_error:
            self.incumbent, self.incumbent_error = proposal, mean
            self.logger.debug(f"New incumbent {proposal.pipeline.render()} at {mean:.4f}")


@OptimizerRegistry.decorator("surrogate")
class SurrogateOptimizer(Optimizer):
    """
    Searches a continuous hyperparameter box [0, 1]^h; exploitation adds
    Gaussian steps of size `step` to the incumbent configuration.
    """

    def __init__(self, *args, step: float = 0.1, **kwargs) -> None:
        super().__init__(*args, **kwargs)
        self.step = step
        self.n_hyperparameters = getattr(self.surface, "n_hyperparameters", 2)
        self.default_value = getattr(self.surface, "default_config", 0.5)

    @staticmethod
    def _config_id(config: np.ndarray) -> str:
        return ",".join(f"{x:.4f}" for x in config)

    def _sample_config(self, predictor_id):
        config = self.rng.uniform(0.0, 1.0, self.n_hyperparameters)
        return tuple(float(x) for x in config), self._config_id(config)

    def _perturb_config(self, proposal):
        centre = np.asarray(proposal.config, dtype=float)
        config = np.clip(centre + self.rng.normal(0.0, self.step, centre.size), 0.0, 1.0)
        return tuple(float(x) for x in config), self._config_id(config)

    def _default_config(self, predictor_id):
        config = np.full(self.n_hyperparameters, self.default_value)
        return tuple(float(x) for x in config), self._config_id(config)


@OptimizerRegistry.decorator("replay")
class ReplayOptimizer(Optimizer):
    """
    Chooses among the configurations recorded for a cell; exploitation keeps
    the incumbent predictor and draws another of its recorded configurations.
    """

    def _recorded(self, predictor_id: PredictorId) -> List[str]:
        return self.surface.configs(self.dataset_id, predictor_id) or [DEFAULT_CONFIG]

    def _sample_config(self, predictor_id):
        configs = self._recorded(predictor_id)
        return (), configs[int(self.rng.integers(len(configs)))]

    def _perturb_config(self, proposal):
        return self._sample_config(proposal.predictor_id)

    def _default_config(self, predictor_id):
        return (), self._recorded(predictor_id)[0]


def build_optimizer(
        name: Optional[str],
        space: ReducedSpace,
        surface: ResponseModel,
        dataset_id: DatasetId,
        rng: np.random.Generator,
        roster: Optional[Roster] = None,
        **kwargs: Any
) -> Optimizer:
    """Instantiate a registered optimizer, defaulting to the surface's own choice."""
    optimizer_cls = OptimizerRegistry[name or surface.default_optimizer]
    return optimizer_cls(space, surface, dataset_id, rng, roster=roster, **kwargs)
