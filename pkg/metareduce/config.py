"""
Run configuration. Values are merged from, lowest precedence first: built-in
defaults, an optional JSON or YAML file, `METAREDUCE_*` environment variables
(after loading `.env`) and explicit command-line flags.
"""
import os
import re

from omegaconf import OmegaConf

from .errors import InputError
from .schema import Schema
from .utils._types import *
from .utils.logs import general_logger

try:
    from dotenv import load_dotenv
except ImportError:
    load_dotenv = None
    general_logger.info("dotenv is not installed - METAREDUCE_* settings are read from the process environment only.")

ENV_PREFIX = "METAREDUCE_"
_RANGE = re.compile(r"^\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*$")
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off", ""}


def parse_int_list(value: Union[str, int, Sequence[Any]]) -> List[int]:
    """
    Parse `1,4,8`, `1..5` or a mix such as `1..3,7` into integers; lists pass
    through with their items converted.
    """
    if isinstance(value, int):
        return [value]
    if not isinstance(value, str):
        return [int(v) for v in value]
    numbers: List[int] = []
    for part in value.split(","):
        if not part.strip():
            continue
        match = _RANGE.match(part)
        if match:
            lo, hi = int(match[1]), int(match[2])
            if hi < lo:
                raise ValueError(f"empty range `{part.strip()}`")
            numbers.extend(range(lo, hi + 1))
        else:
            numbers.append(int(part))
    return numbers


def parse_str_list(value: Union[str, Sequence[str]]) -> List[str]:
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return [str(v) for v in value]


def parse_bool(value: Union[str, bool]) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ValueError(f"not a boolean: `{value}`")


class RunConfig(Schema):
    bases: List[str] = Field(default_factory=list)
    roster: Optional[str] = None
    surface: Optional[str] = None
    strategies: List[str] = Field(default_factory=lambda: ["O1-k4", "M1-k4", "L1-k4", "R-k4", "baseline", "avatar"])
    k_grid: List[int] = Field(default_factory=lambda: [1, 4, 8, 10, 19, 30])
    datasets: List[str] = Field(default_factory=list)
    budget: float = Field(default=7200.0, gt=0.0)
    landmark_deduction: float = Field(default=0.0, ge=0.0)
    seeds: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    alpha_rule: AlphaRule = "conventional"
    out: str = "reports"
    pipeline_filter: FilterName = "all"
    key: RankKey = "mean"
    failure_policy: FailurePolicy = "penalize"
    drop_penalty_cells: bool = False
    credit_base_learners: bool = False
    percent: bool = False
    folds: int = Field(default=10, ge=2)
    landmarkers: int = Field(default=5, ge=1)
    optimizer: Optional[OptimizerName] = None
    invalid_fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    invalid_cost: float = Field(default=1.0, ge=0.0)
    tractability_threshold: int = Field(default=1000, ge=0)
    workers: int = Field(default=1, ge=1)

    @field_validator("k_grid", "seeds", mode="before")
    @classmethod
    def _int_lists(cls, value: Any) -> List[int]:
        return parse_int_list(value)

    @field_validator("bases", "strategies", "datasets", mode="before")
    @classmethod
    def _str_lists(cls, value: Any) -> List[str]:
        return parse_str_list(value)

    @field_validator("bases")
    @classmethod
    def _bases_exist(cls, value: List[str]) -> List[str]:
        for path in value:
            if not os.path.exists(path):
                raise ValueError(f"base file `{path}` does not exist")
        return value

    @field_validator("roster", "surface")
    @classmethod
    def _path_exists(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and not os.path.exists(value):
            raise ValueError(f"file `{value}` does not exist")
        return value

    @field_validator("seeds")
    @classmethod
    def _seeds_present(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("at least one seed is required")
        return value


_LIST_FIELDS = {"bases": parse_str_list, "strategies": parse_str_list, "datasets": parse_str_list,
                "k_grid": parse_int_list, "seeds": parse_int_list}
_BOOL_FIELDS = {"drop_penalty_cells", "credit_base_learners", "percent"}


def _coerce(name: str, value: Any) -> Any:
    try:
        if name in _LIST_FIELDS:
            return _LIST_FIELDS[name](value)
        if name in _BOOL_FIELDS:
            return parse_bool(value)
    except (TypeError, ValueError) as e:
        raise InputError(f"invalid value for `{name}`: {e}") from None
    return value


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    """Settings given as `METAREDUCE_<FIELD>` variables."""
    environ = os.environ if environ is None else environ
    overrides = {}
    for name in RunConfig.model_fields:
        raw = environ.get(ENV_PREFIX + name.upper())
        if raw is not None:
            overrides[name] = _coerce(name, raw)
    return overrides


def load_run_config(
        config_path: Optional[str] = None,
        flags: Optional[Mapping[str, Any]] = None,
        environ: Optional[Mapping[str, str]] = None,
        use_dotenv: bool = True
) -> RunConfig:
    """
    Merge defaults, config file, environment and flags into a `RunConfig`.

    Args:
        config_path (str): JSON or YAML file with `RunConfig` keys.
        flags (Mapping): Command-line values; `None` entries are ignored.
        environ (Mapping): Environment to read, defaults to `os.environ`.
        use_dotenv (bool): Load a `.env` file into the environment first.

    Raises:
        InputError: Unknown keys, missing files or invalid values.
    """
    if use_dotenv and environ is None and load_dotenv is not None:
        load_dotenv()

    layers = [OmegaConf.create(RunConfig().dict())]
    if config_path is not None:
        if not os.path.exists(config_path):
            raise InputError(f"config file `{config_path}` does not exist")
        file_cfg = OmegaConf.to_container(OmegaConf.load(config_path), resolve=True)
        if not isinstance(file_cfg, dict):
            raise InputError(f"config file `{config_path}` must hold a mapping")
        unknown = sorted(set(file_cfg) - set(RunConfig.model_fields))
        if unknown:
            raise InputError(f"unknown config key(s) in `{config_path}`: {', '.join(unknown)}")
        layers.append(OmegaConf.create({k: _coerce(k, v) for k, v in file_cfg.items()}))
    layers.append(OmegaConf.create(env_overrides(environ)))
    layers.append(OmegaConf.create({k: _coerce(k, v) for k, v in (flags or {}).items() if v is not None}))

    merged = OmegaConf.to_container(OmegaConf.merge(*layers), resolve=True)
    return RunConfig(**merged)
