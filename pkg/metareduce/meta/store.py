"""
Meta-knowledge bases: ingestion, validation and aggregation of single-fold
evaluation records.
"""
import json
import math
import os
import threading
from collections import defaultdict
from enum import Enum
from pathlib import Path

import pandas as pd

from ..errors import DuplicateRecord, MixedFolds, SchemaViolation, UnknownIdentifier
from ..schema import Schema, SchemaValidationError
from ..space.components import Roster
from ..utils._types import *
from ..utils.logs import get_logger

logger = get_logger(__name__)

CSV_COLUMNS = (
    "base_id", "dataset_id", "predictor_id", "pipeline", "config_id",
    "fold_index", "error_rate", "eval_time_s", "status",
)
PENALTY_ERROR = 1.0


class RecordStatus(str, Enum):
    OK = "ok"
    FAILED = "failed"


class Flavor(str, Enum):
    OPPORTUNISTIC = "opportunistic"
    SYSTEMATIC = "systematic"


class PipelineFilter(str, Enum):
    ALL = "all"
    SINGLE_ONLY = "single_only"
    MULTI_ONLY = "multi_only"

    def accepts(self, record: "EvaluationRecord") -> bool:
        if self is PipelineFilter.SINGLE_ONLY:
            return record.is_single_component
        if self is PipelineFilter.MULTI_ONLY:
            return not record.is_single_component
        return True


class EvaluationRecord(Schema):
    """
    One fold of one cross-validated pipeline evaluation.
    """
    model_config = ConfigDict(frozen=True)

    base_id: str = Field(min_length=1)
    dataset_id: DatasetId = Field(min_length=1)
    predictor_id: PredictorId = Field(min_length=1)
    pipeline: Tuple[ComponentId, ...]
    config_id: str = Field(min_length=1)
    fold_index: int = Field(ge=0)
    error_rate: Optional[float] = None
    eval_time: float = Field(ge=0.0)
    status: RecordStatus

    @model_validator(mode="after")
    def _check(self) -> "EvaluationRecord":
        if self.status is RecordStatus.OK:
            if self.error_rate is None:
                raise ValueError("ok record needs an error_rate")
            if not 0.0 <= self.error_rate <= 1.0:
                raise ValueError(f"error_rate {self.error_rate} outside [0, 1]")
        elif self.error_rate is not None:
            raise ValueError("failed record cannot carry an error_rate")
        if not self.pipeline:
            raise ValueError("pipeline is empty")
        if self.pipeline[-1] != self.predictor_id:
            raise ValueError(
                f"pipeline ends with `{self.pipeline[-1]}`, expected `{self.predictor_id}`"
            )
        return self

    @property
    def ok(self) -> bool:
        return self.status is RecordStatus.OK

    @property
    def is_single_component(self) -> bool:
        return len(self.pipeline) == 1

    @property
    def cell_key(self) -> Tuple[DatasetId, PredictorId, str, int]:
        return (self.dataset_id, self.predictor_id, self.config_id, self.fold_index)

    def to_row(self) -> Dict[str, Any]:
        """Row in the external CSV/JSON-lines field naming."""
        return {
            "base_id": self.base_id,
            "dataset_id": self.dataset_id,
            "predictor_id": self.predictor_id,
            "pipeline": "|".join(self.pipeline),
            "config_id": self.config_id,
            "fold_index": self.fold_index,
            "error_rate": self.error_rate,
            "eval_time_s": self.eval_time,
            "status": self.status.value,
        }


class CellAggregate(Schema):
    model_config = ConfigDict(frozen=True)

    dataset_id: DatasetId
    predictor_id: PredictorId
    n_evaluations: int = Field(ge=0)
    mean_error: float = Field(ge=0.0, le=1.0)
    best_error: float = Field(ge=0.0, le=1.0)
    mean_eval_time: float = Field(ge=0.0)
    n_single_component: int = Field(ge=0)
    n_multi_component: int = Field(ge=0)
    n_failed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _penalty(self) -> "CellAggregate":
        if self.n_evaluations == 0 and (self.mean_error != PENALTY_ERROR or self.best_error != PENALTY_ERROR):
            raise ValueError("an unevaluated cell carries the 1.0 penalty")
        if self.best_error > self.mean_error + 1e-12:
            raise ValueError("best_error exceeds mean_error")
        return self

    @property
    def is_penalty(self) -> bool:
        return self.n_evaluations == 0


class MetaKnowledgeBase:
    """
    Immutable, validated collection of evaluation records. Cell aggregates are
    memoized under a lock, so one base may be shared by worker threads.

    Args:
        base_id (str): Identifier of the base.
        flavor (Flavor): `opportunistic` (harvested from optimizer runs) or
            `systematic` (one configuration per dataset and predictor).
        records (Iterable[EvaluationRecord]): Records, all of this base.
        folds (int): Cross-validation fold count shared by every record.
        roster (Roster): Declared universe; observed identifiers are added to it.
        credit_base_learners (bool): Whether a base learner appearing inside a
            meta-predictor pipeline also credits its own cell.
    """

    def __init__(
            self,
            base_id: str,
            flavor: Union[Flavor, str],
            records: Iterable[EvaluationRecord] = (),
            folds: int = 10,
            roster: Optional[Roster] = None,
            credit_base_learners: bool = False
    ) -> None:
        self.logger = get_logger(self.__class__.__name__)
        self.base_id = base_id
        self.flavor = Flavor(flavor)
        self.folds = folds
        self.credit_base_learners = credit_base_learners
        self.records: Tuple[EvaluationRecord, ...] = tuple(records)

        roster = roster or Roster()
        observed_predictors = {r.predictor_id for r in self.records}
        self.roster = roster.with_predictors(observed_predictors)
        self.predictor_universe: FrozenSet[PredictorId] = frozenset(self.roster.predictors)
        self.dataset_universe: FrozenSet[DatasetId] = frozenset(
            set(roster.datasets) | {r.dataset_id for r in self.records}
        )

        self._cells: Dict[Tuple[DatasetId, PredictorId], List[EvaluationRecord]] = defaultdict(list)
        self._by_dataset: Dict[DatasetId, List[EvaluationRecord]] = defaultdict(list)
        self._aggregates: Dict[Tuple[DatasetId, PredictorId, PipelineFilter], CellAggregate] = {}
        self._aggregates_lock = threading.Lock()
        self._validate_and_index()

    def _validate_and_index(self) -> None:
        for row, record in enumerate(self.records, start=1):
            if record.base_id != self.base_id:
                raise SchemaViolation(self.base_id, [f"record {row}: belongs to base `{record.base_id}`"])
            if record.fold_index >= self.folds:
                raise MixedFolds(self.base_id, self.folds, row, record.fold_index)
            self._by_dataset[record.dataset_id].append(record)
            for predictor in self._credited(record):
                self._cells[(record.dataset_id, predictor)].append(record)

        if self.flavor is Flavor.SYSTEMATIC:
            problems = []
            for (dataset, predictor), cell in sorted(self._cells.items()):
                own = [r for r in cell if r.predictor_id == predictor]
                configs = {r.config_id for r in own}
                n_ok = sum(r.ok for r in own)
                if len(configs) > 1:
                    problems.append(f"({dataset}, {predictor}): {len(configs)} configurations in a systematic base")
                if n_ok > self.folds:
                    problems.append(f"({dataset}, {predictor}): {n_ok} ok records exceed {self.folds} folds")
            if problems:
                raise SchemaViolation(self.base_id, problems)

    def _credited(self, record: EvaluationRecord) -> List[PredictorId]:
        credited = [record.predictor_id]
        if self.credit_base_learners:
            for component in record.pipeline[:-1]:
                if component in self.predictor_universe and component not in credited:
                    credited.append(component)
        return credited

    @property
    def predictors(self) -> List[PredictorId]:
        return sorted(self.predictor_universe)

    @property
    def datasets(self) -> List[DatasetId]:
        return sorted(self.dataset_universe)

    def check_dataset(self, dataset_id: DatasetId) -> None:
        if dataset_id not in self.dataset_universe:
            raise UnknownIdentifier("dataset", dataset_id)

    def check_predictor(self, predictor_id: PredictorId) -> None:
        if predictor_id not in self.predictor_universe:
            raise UnknownIdentifier("predictor", predictor_id)

    def cell_records(self, dataset_id: DatasetId, predictor_id: PredictorId) -> List[EvaluationRecord]:
        """Records credited to a cell, in ingestion order."""
        self.check_dataset(dataset_id)
        self.check_predictor(predictor_id)
        return list(self._cells.get((dataset_id, predictor_id), ()))

    def ok_errors(
            self,
            dataset_id: DatasetId,
            predictor_id: PredictorId,
            pipeline_filter: Union[PipelineFilter, str] = PipelineFilter.ALL
    ) -> List[float]:
        """Single-fold errors of the ok records of a cell matching the filter."""
        pipeline_filter = PipelineFilter(pipeline_filter)
        return [
            r.error_rate for r in self.cell_records(dataset_id, predictor_id)
            if r.ok and pipeline_filter.accepts(r)
        ]

    def dataset_records(self, dataset_id: DatasetId) -> List[EvaluationRecord]:
        self.check_dataset(dataset_id)
        return list(self._by_dataset.get(dataset_id, ()))

    def __len__(self) -> int:
        return len(self.records)

    def __repr__(self) -> str:
        return (
            f"MetaKnowledgeBase({self.base_id!r}, {self.flavor.value}, records={len(self.records)}, "
            f"datasets={len(self.dataset_universe)}, predictors={len(self.predictor_universe)})"
        )


def _parse_row(row: Mapping[str, Any], percent: bool) -> Dict[str, Any]:
    """
    Convert one raw CSV/JSON row into `EvaluationRecord` keyword arguments.
    """
    missing = [c for c in CSV_COLUMNS if c not in row]
    if missing:
        raise ValueError(f"missing field(s) {', '.join(missing)}")

    pipeline = row["pipeline"]
    if isinstance(pipeline, str):
        pipeline = tuple(p.strip() for p in pipeline.split("|")) if pipeline.strip() else ()

    error = row["error_rate"]
    if error is None or (isinstance(error, str) and not error.strip()):
        error = None
    else:
        error = float(error)
        if math.isnan(error):
            raise ValueError("error_rate is NaN")
        if percent:
            error /= 100.0

    fold = row["fold_index"]
    if isinstance(fold, str):
        fold = fold.strip()
        if not fold.lstrip("-").isdigit():
            raise ValueError(f"fold_index `{fold}` is not an integer")
    return {
        "base_id": str(row["base_id"]).strip(),
        "dataset_id": str(row["dataset_id"]).strip(),
        "predictor_id": str(row["predictor_id"]).strip(),
        "pipeline": pipeline,
        "config_id": str(row["config_id"]).strip(),
        "fold_index": int(fold),
        "error_rate": error,
        "eval_time": float(row["eval_time_s"]),
        "status": str(row["status"]).strip(),
    }


def _read_source(source: Union[str, os.PathLike, Iterable[Mapping[str, Any]]]) -> Tuple[str, List[Tuple[int, Mapping[str, Any]]]]:
    """
    Return a source label and (line number, raw row) pairs.
    """
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        if not path.exists():
            raise FileNotFoundError(f"File not found at {path}.")
        if path.suffix.lower() in (".jsonl", ".ndjson", ".json"):
            rows = []
            with open(path, "r", encoding="utf-8") as f:
                for number, line in enumerate(f, start=1):
                    if not line.strip():
                        continue
                    try:
                        rows.append((number, json.loads(line)))
                    except json.JSONDecodeError as e:
                        raise SchemaViolation(str(path), [f"row {number}: invalid JSON ({e.msg})"]) from None
            return str(path), rows

        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
        missing = [c for c in CSV_COLUMNS if c not in frame.columns]
        if missing:
            raise SchemaViolation(str(path), [f"row 1: header lacks column(s) {', '.join(missing)}"])
        # Header is line 1
        return str(path), [(i + 2, row) for i, row in enumerate(frame.to_dict("records"))]

    return "<stream>", [(i + 1, row) for i, row in enumerate(source)]


def ingest(
        source: Union[str, os.PathLike, Iterable[Mapping[str, Any]]],
        base_id: Optional[str] = None,
        flavor: Optional[Union[Flavor, str]] = None,
        folds: int = 10,
        roster: Optional[Roster] = None,
        percent: bool = False,
        credit_base_learners: bool = False
) -> MetaKnowledgeBase:
    """
    Parse and validate an evaluation record stream into a meta-knowledge base.

    Args:
        source: Path to a CSV or JSON-lines file, or an iterable of row mappings
            using the CSV field names.
        base_id (str): Base to load. Rows of other bases are skipped. When omitted
            the stream must hold exactly one base.
        flavor (Flavor): Base flavor; inferred from the records when omitted.
        folds (int): Cross-validation fold count.
        roster (Roster): Declared predictors and datasets.
        percent (bool): Error rates are given in percent.
        credit_base_learners (bool): See `MetaKnowledgeBase`.

    Returns:
        MetaKnowledgeBase: The validated base.

    Raises:
        SchemaViolation: Malformed rows, listed with their row numbers.
        DuplicateRecord: Two ok records of the same fold with different errors.
        MixedFolds: A fold index outside `[0, folds - 1]`.
    """
    label, raw_rows = _read_source(source)
    diagnostics: List[str] = []
    parsed: List[Tuple[int, EvaluationRecord]] = []

    for number, row in raw_rows:
        try:
            record = EvaluationRecord(**_parse_row(row, percent))
        except SchemaValidationError as e:
            diagnostics.append(f"row {number}: {'; '.join(e.problems)}")
            continue
        except (ValueError, TypeError) as e:
            diagnostics.append(f"row {number}: {e}")
            continue
        parsed.append((number, record))

    if diagnostics:
        raise SchemaViolation(label, diagnostics)

    base_ids = sorted({r.base_id for _, r in parsed})
    if base_id is None:
        if len(base_ids) > 1:
            raise SchemaViolation(label, [f"stream mixes bases {', '.join(base_ids)}; pass base_id"])
        base_id = base_ids[0] if base_ids else (Path(label).stem if label != "<stream>" else "base")
    skipped = sum(1 for _, r in parsed if r.base_id != base_id)
    if skipped:
        logger.info(f"Skipped {skipped} rows of other bases in {label}.")
    parsed = [(n, r) for n, r in parsed if r.base_id == base_id]

    seen: Dict[Tuple[DatasetId, PredictorId, str, int], float] = {}
    for number, record in parsed:
        if record.fold_index >= folds:
            raise MixedFolds(base_id, folds, number, record.fold_index)
        if not record.ok:
            continue
        previous = seen.setdefault(record.cell_key, record.error_rate)
        if previous != record.error_rate:
            raise DuplicateRecord(
                f"({base_id}, {', '.join(map(str, record.cell_key))}) at row {number}",
                previous, record.error_rate
            )

    records = [r for _, r in parsed]
    if flavor is None:
        flavor = infer_flavor(records, folds)
    base = MetaKnowledgeBase(
        base_id=base_id,
        flavor=flavor,
        records=records,
        folds=folds,
        roster=roster,
        credit_base_learners=credit_base_learners
    )
    logger.info(f"Ingested {len(records)} records into {base!r}.")
    return base


def infer_flavor(records: Sequence[EvaluationRecord], folds: int = 10) -> Flavor:
    """
    A base is systematic when every (dataset, predictor) pair holds a single
    configuration with at most `folds` ok records.
    """
    if not records:
        return Flavor.OPPORTUNISTIC
    configs: Dict[Tuple[str, str], set] = defaultdict(set)
    oks: Dict[Tuple[str, str], int] = defaultdict(int)
    for r in records:
        configs[(r.dataset_id, r.predictor_id)].add(r.config_id)
        oks[(r.dataset_id, r.predictor_id)] += r.ok
    if all(len(c) == 1 for c in configs.values()) and all(n <= folds for n in oks.values()):
        return Flavor.SYSTEMATIC
    return Flavor.OPPORTUNISTIC


def aggregate(
        base: MetaKnowledgeBase,
        dataset_id: DatasetId,
        predictor_id: PredictorId,
        pipeline_filter: Union[PipelineFilter, str] = PipelineFilter.ALL
) -> CellAggregate:
    """
    Summarize the ok records of one (dataset, predictor) cell. Cells without
    matching records get the 1.0 penalty.
    """
    pipeline_filter = PipelineFilter(pipeline_filter)
    key = (dataset_id, predictor_id, pipeline_filter)
    with base._aggregates_lock:
        cached = base._aggregates.get(key)
    if cached is not None:
        return cached

    cell = base.cell_records(dataset_id, predictor_id)
    ok = [r for r in cell if r.ok]
    n_single = sum(1 for r in ok if r.is_single_component)
    matching = [r for r in ok if pipeline_filter.accepts(r)]

    if matching:
        errors = [r.error_rate for r in matching]
        # fsum keeps the mean independent of record order
        mean_error = min(1.0, math.fsum(errors) / len(errors))
        best_error = min(errors)
        mean_time = math.fsum(r.eval_time for r in matching) / len(matching)
    else:
        mean_error = best_error = PENALTY_ERROR
        mean_time = 0.0

    result = CellAggregate(
        dataset_id=dataset_id,
        predictor_id=predictor_id,
        n_evaluations=len(matching),
        mean_error=mean_error,
        best_error=best_error,
        mean_eval_time=mean_time,
        n_single_component=n_single,
        n_multi_component=len(ok) - n_single,
        n_failed=len(cell) - len(ok)
    )
    with base._aggregates_lock:
        return base._aggregates.setdefault(key, result)


def evaluation_counts(
        base: MetaKnowledgeBase,
        pipeline_filter: Union[PipelineFilter, str] = PipelineFilter.ALL,
        sort: bool = True
) -> pd.DataFrame:
    """
    Dense dataset x predictor matrix of ok single-fold evaluation counts.

    With `sort`, rows and columns are ordered by total count descending, ties by id.
    """
    datasets, predictors = base.datasets, base.predictors
    counts = pd.DataFrame(
        [[aggregate(base, d, p, pipeline_filter).n_evaluations for p in predictors] for d in datasets],
        index=pd.Index(datasets, name="dataset_id"),
        columns=pd.Index(predictors, name="predictor_id"),
        dtype="int64"
    )
    if sort and not counts.empty:
        row_order = sorted(datasets, key=lambda d: (-int(counts.loc[d].sum()), d))
        col_order = sorted(predictors, key=lambda p: (-int(counts[p].sum()), p))
        counts = counts.loc[row_order, col_order]
    return counts


def evaluation_cost_matrix(base: MetaKnowledgeBase) -> pd.DataFrame:
    """Mean per-fold evaluation time per (dataset, predictor); 0.0 where unevaluated."""
    return pd.DataFrame(
        [[aggregate(base, d, p).mean_eval_time for p in base.predictors] for d in base.datasets],
        index=pd.Index(base.datasets, name="dataset_id"),
        columns=pd.Index(base.predictors, name="predictor_id"),
    )


def total_evaluations(base: MetaKnowledgeBase, dataset_id: DatasetId) -> int:
    """Number of ok single-fold records on a dataset."""
    return sum(r.ok for r in base.dataset_records(dataset_id))


def best_full_cv(base: MetaKnowledgeBase, dataset_id: DatasetId, predictor_id: PredictorId) -> Optional[float]:
    """
    Best mean error of any configuration that has an ok record on every fold,
    or None when no configuration completed a full cross-validation.
    """
    by_config: Dict[str, Dict[int, List[float]]] = defaultdict(lambda: defaultdict(list))
    for r in base.cell_records(dataset_id, predictor_id):
        if r.ok and r.predictor_id == predictor_id:
            by_config[r.config_id][r.fold_index].append(r.error_rate)

    best = None
    for config_id in sorted(by_config):
        per_fold = by_config[config_id]
        if len(per_fold) != base.folds:
            continue
        value = math.fsum(math.fsum(v) / len(v) for v in per_fold.values()) / base.folds
        if best is None or value < best:
            best = value
    return best


def write_records(base: MetaKnowledgeBase, path: Union[str, os.PathLike], fmt: Optional[str] = None) -> None:
    """
    Write the records of a base as CSV or JSON lines (chosen from the suffix
    unless `fmt` is given). Re-ingesting the file yields the same records.
    """
    path = Path(path)
    fmt = fmt or ("jsonl" if path.suffix.lower() in (".jsonl", ".ndjson", ".json") else "csv")
    rows = [r.to_row() for r in base.records]

    if fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as f:
            for row in rows:
                f.write(json.dumps(row) + "\n")
        return

    for row in rows:
        row["error_rate"] = "" if row["error_rate"] is None else repr(row["error_rate"])
        row["eval_time_s"] = repr(row["eval_time_s"])
    frame = pd.DataFrame(rows, columns=list(CSV_COLUMNS))
    frame.to_csv(path, index=False, lineterminator="\n")
