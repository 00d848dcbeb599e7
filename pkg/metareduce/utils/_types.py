"""
Names shared by every module through `from .utils._types import *`: typing
helpers, the pydantic building blocks and the domain's identifier aliases.
"""
import sys

from typing import (
    TYPE_CHECKING,
    Any,
    Callable,
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    List,
    Literal,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
    Union,
)

if sys.version_info >= (3, 11):
    from typing import Self  # type: ignore
else:
    from typing_extensions import Self

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

# Serialized `Serializable` payloads
SerializedType = Dict[str, Any]
DeserializableType = Union[str, Dict[str, Any]]

# Identifiers as they appear in record files
DatasetId = str
PredictorId = str
ComponentId = str

# Option values shared by the analyses, the config and the CLI
RankKey = Literal["mean", "best"]
AlphaRule = Literal["conventional", "literal"]
FailurePolicy = Literal["penalize", "drop"]
FilterName = Literal["all", "single_only", "multi_only"]
OptimizerName = Literal["replay", "surrogate"]
