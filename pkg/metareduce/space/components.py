from enum import Enum

from ..core import Serializable
from ..errors import RosterError, UnknownIdentifier
from ..schema import Schema
from ..utils._types import *


class ComponentKind(str, Enum):
    PREDICTOR = "predictor"
    META_PREDICTOR = "meta_predictor"
    KERNEL = "kernel"
    PREPROCESSOR = "preprocessor"


class DependencyKind(str, Enum):
    NEEDS_BASE_LEARNER = "needs_base_learner"
    NEEDS_HOST_PREDICTOR = "needs_host_predictor"


class Dependency(Schema):
    model_config = ConfigDict(frozen=True)

    kind: DependencyKind
    host: Optional[ComponentId] = None

    @model_validator(mode="after")
    def _host_iff_kernel(self) -> "Dependency":
        if self.kind is DependencyKind.NEEDS_HOST_PREDICTOR and not self.host:
            raise ValueError("needs_host_predictor requires a host id")
        if self.kind is DependencyKind.NEEDS_BASE_LEARNER and self.host:
            raise ValueError("needs_base_learner takes no host id")
        return self


class ComponentSpec(Schema):
    """
    One component of the roster: a predictor, a meta-predictor wrapping a base
    learner, a kernel that only runs inside a host predictor, or a preprocessor.
    """
    model_config = ConfigDict(frozen=True)

    id: ComponentId
    kind: ComponentKind = ComponentKind.PREDICTOR
    dependency: Optional[Dependency] = None

    @model_validator(mode="after")
    def _dependency_matches_kind(self) -> "ComponentSpec":
        dep = self.dependency.kind if self.dependency else None
        if self.kind is ComponentKind.META_PREDICTOR and dep is not DependencyKind.NEEDS_BASE_LEARNER:
            raise ValueError(f"meta_predictor `{self.id}` must declare needs_base_learner")
        if self.kind is ComponentKind.KERNEL and dep is not DependencyKind.NEEDS_HOST_PREDICTOR:
            raise ValueError(f"kernel `{self.id}` must declare needs_host_predictor")
        if self.kind in (ComponentKind.PREDICTOR, ComponentKind.PREPROCESSOR) and dep is not None:
            raise ValueError(f"{self.kind.value} `{self.id}` cannot declare a dependency")
        return self

    @property
    def is_plain(self) -> bool:
        return self.kind is ComponentKind.PREDICTOR

    @property
    def is_ranked(self) -> bool:
        """Predictors, meta-predictors and kernels are ranked; preprocessors are not."""
        return self.kind is not ComponentKind.PREPROCESSOR

    @property
    def can_terminate(self) -> bool:
        return self.kind in (ComponentKind.PREDICTOR, ComponentKind.META_PREDICTOR)


class Pipeline(Schema):
    """
    Sequential pipeline: a structure of component ids with a parallel list of
    configuration ids. The final component is the scoring predictor.
    """
    model_config = ConfigDict(frozen=True)

    structure: Tuple[ComponentId, ...]
    configs: Tuple[str, ...]
    max_len: int = Field(default=7, ge=1)

    @model_validator(mode="after")
    def _shape(self) -> "Pipeline":
        if not 1 <= len(self.structure) <= self.max_len:
            raise ValueError(f"pipeline length {len(self.structure)} outside [1, {self.max_len}]")
        if len(self.configs) != len(self.structure):
            raise ValueError("configs must parallel structure")
        return self

    @property
    def predictor(self) -> ComponentId:
        return self.structure[-1]

    def render(self) -> str:
        """`|`-separated structure with configs, e.g. `PCA|P3[kernel=P7]`."""
        parts = []
        for component, config in zip(self.structure, self.configs):
            parts.append(f"{component}[{config}]" if config else component)
        return "|".join(parts)

    def check_against(self, roster: "Roster") -> None:
        """
        Raise `RosterError` when a component is unknown or the final component cannot
        terminate a pipeline.
        """
        for component in self.structure:
            if component not in roster:
                raise RosterError(f"pipeline component `{component}` is not in the roster")
        if not roster[self.predictor].can_terminate:
            raise RosterError(
                f"pipeline must end with a predictor or meta-predictor, got `{self.predictor}`"
            )


class Roster(Serializable):
    """
    Declared component and dataset universe of a meta-knowledge base.
    """
    components: List[ComponentSpec] = Field(default_factory=list)
    datasets: List[DatasetId] = Field(default_factory=list)

    @model_validator(mode="after")
    def _consistent(self) -> "Roster":
        ids = [c.id for c in self.components]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate component ids in roster")
        kinds = {c.id: c.kind for c in self.components}
        for c in self.components:
            if c.dependency and c.dependency.host:
                if kinds.get(c.dependency.host) is not ComponentKind.PREDICTOR:
                    raise ValueError(
                        f"host `{c.dependency.host}` of `{c.id}` must be a plain predictor in the roster"
                    )
        return self

    @classmethod
    def plain(cls, predictors: Iterable[PredictorId], datasets: Iterable[DatasetId] = ()) -> Self:
        """Roster of plain predictors only."""
        return cls(
            components=[ComponentSpec(id=p) for p in predictors],
            datasets=list(datasets)
        )

    def __contains__(self, component_id: object) -> bool:
        return any(c.id == component_id for c in self.components)

    def __getitem__(self, component_id: ComponentId) -> ComponentSpec:
        for c in self.components:
            if c.id == component_id:
                return c
        raise UnknownIdentifier("component", component_id)

    def get(self, component_id: ComponentId) -> Optional[ComponentSpec]:
        return next((c for c in self.components if c.id == component_id), None)

    @property
    def predictors(self) -> List[PredictorId]:
        """Ranked component ids, in declaration order."""
        return [c.id for c in self.components if c.is_ranked]

    @property
    def preprocessors(self) -> List[ComponentId]:
        return [c.id for c in self.components if c.kind is ComponentKind.PREPROCESSOR]

    def of_kind(self, kind: ComponentKind) -> List[ComponentId]:
        return [c.id for c in self.components if c.kind is kind]

    def with_predictors(self, predictors: Iterable[PredictorId]) -> "Roster":
        """Return a copy extended with plain predictors that are not declared yet."""
        extra = [ComponentSpec(id=p) for p in sorted(set(predictors)) if p not in self]
        return Roster(components=[*self.components, *extra], datasets=list(self.datasets))
