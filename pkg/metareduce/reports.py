"""
Report tables and the staged writer behind every CLI subcommand.

Tables are pandas frames with sorted rows and a fixed float format, so the
same inputs always render to the same bytes. `ReportWriter` renders every file
in memory first and touches the output directory only on `commit`.
"""
import json
import os
from pathlib import Path

import pandas as pd

from .challenge import ChallengeRow, IndistinguishabilityMatrix
from .core import Serializable
from .expectation import ExpectationReport
from .harness.analysis import AggregateRow, StrategyCell, StrategyRanking, TopHalfRow
from .harness.search import RunOutcome
from .landmarking import LandmarkResult
from .meta.store import MetaKnowledgeBase, aggregate, evaluation_counts
from .ranking import CrossBaseReport, RankingTable
from .utils._types import *
from .utils.logs import get_logger

FLOAT_FORMAT = "%.6f"


class ReportWriter:
    """
    Collects rendered reports and writes them together.

    Args:
        out_dir (str): Output directory, created on commit.
        float_format (str): printf-style format of float cells.
    """

    def __init__(self, out_dir: Union[str, os.PathLike], float_format: str = FLOAT_FORMAT) -> None:
        self.logger = get_logger(self.__class__.__name__)
        self.out_dir = Path(out_dir)
        self.float_format = float_format
        self._staged: Dict[str, str] = {}

    def add_frame(self, name: str, frame: pd.DataFrame) -> None:
        self._staged[name] = frame.to_csv(index=False, float_format=self.float_format, lineterminator="\n")

    def add_json(self, name: str, payload: Union[Serializable, Mapping[str, Any]]) -> None:
        data = payload.to_json() if isinstance(payload, Serializable) else dict(payload)
        self._staged[name] = json.dumps(data, indent=4, sort_keys=True) + "\n"

    @property
    def staged(self) -> List[str]:
        return sorted(self._staged)

    def commit(self) -> List[Path]:
        """Write every staged report; returns the written paths."""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name in sorted(self._staged):
            path = self.out_dir / name
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(self._staged[name])
            written.append(path)
        self.logger.info(f"Wrote {len(written)} report(s) to {self.out_dir}: {', '.join(self.staged)}")
        self._staged.clear()
        return written


def _frame(rows: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=list(columns))


# meta_store

def aggregates_frame(base: MetaKnowledgeBase, pipeline_filter: str = "all") -> pd.DataFrame:
    rows = []
    for d in base.datasets:
        for p in base.predictors:
            cell = aggregate(base, d, p, pipeline_filter)
            rows.append({
                "dataset": d,
                "predictor": p,
                "n_evaluations": cell.n_evaluations,
                "n_failed": cell.n_failed,
                "mean_error": cell.mean_error,
                "best_error": cell.best_error,
                "mean_eval_time_s": cell.mean_eval_time,
                "n_single_component": cell.n_single_component,
                "n_multi_component": cell.n_multi_component,
            })
    return _frame(rows, [
        "dataset", "predictor", "n_evaluations", "n_failed", "mean_error", "best_error",
        "mean_eval_time_s", "n_single_component", "n_multi_component",
    ])


def counts_frame(base: MetaKnowledgeBase, pipeline_filter: str = "all") -> pd.DataFrame:
    """Evaluation-count matrix with datasets as rows, most evaluated first."""
    return evaluation_counts(base, pipeline_filter).reset_index()


# ranking

def rankings_frame(table: RankingTable) -> pd.DataFrame:
    rows = [
        {
            "dataset": d,
            "predictor": p,
            "mean_error": table.per_dataset_mean[d][p],
            "rank": table.per_dataset_rank[d][p],
        }
        for d in table.datasets
        for p in table.predictors
    ]
    return _frame(rows, ["dataset", "predictor", "mean_error", "rank"])


def leaderboard_frame(table: RankingTable) -> pd.DataFrame:
    rows = [{"predictor": e.predictor_id, "avg_rank": e.avg_rank, "position": e.position} for e in table.leaderboard]
    return _frame(rows, ["predictor", "avg_rank", "position"])


def correlations_frame(reports: Sequence[CrossBaseReport]) -> pd.DataFrame:
    rows = []
    for report in reports:
        for row in report.rows:
            rows.append({
                "dataset": row.dataset_id,
                "rank_corr": row.rank_corr,
                "error_corr": row.error_corr,
                "subset_label": row.subset_label,
                "n_predictors": row.n_predictors,
            })
        rows.append({
            "dataset": "__leaderboard__",
            "rank_corr": report.leaderboard_rank_corr,
            "error_corr": None,
            "subset_label": report.subset_label,
            "n_predictors": None,
        })
    frame = _frame(rows, ["dataset", "rank_corr", "error_corr", "subset_label", "n_predictors"])
    frame["n_predictors"] = frame["n_predictors"].astype("Int64")
    return frame


def rank_distribution_frame(table: RankingTable) -> pd.DataFrame:
    """Predictor x dataset rank grid, the data behind a rank heatmap."""
    frame = pd.DataFrame(
        [[table.per_dataset_rank[d][p] for d in table.datasets] for p in table.predictors],
        columns=table.datasets
    )
    frame.insert(0, "predictor", table.predictors)
    return frame


# landmarking

def similarity_frame(results: Mapping[DatasetId, Optional[LandmarkResult]]) -> pd.DataFrame:
    rows = [
        {
            "new_dataset": d,
            "most_similar": r.most_similar if r else None,
            "coefficient": r.coefficient if r else None,
            "landmark_cost_s": r.landmark_cost if r else None,
        }
        for d, r in sorted(results.items())
    ]
    return _frame(rows, ["new_dataset", "most_similar", "coefficient", "landmark_cost_s"])


# challenge

def challenge_frame(rows: Sequence[ChallengeRow], k_grid: Sequence[int], name_a: str, name_b: Optional[str]) -> pd.DataFrame:
    columns = ["dataset", f"skewness_{name_a}"]
    if name_b is not None:
        columns.append(f"skewness_{name_b}")
    columns += ["best_group_size", "second_group_size"] + [f"hit_prob_k{k}" for k in k_grid]
    records = []
    for row in rows:
        record = {
            "dataset": row.dataset_id,
            f"skewness_{name_a}": row.skewness_a,
            "best_group_size": row.best_group_size,
            "second_group_size": row.second_group_size,
        }
        if name_b is not None:
            record[f"skewness_{name_b}"] = row.skewness_b
        record.update({f"hit_prob_k{k}": row.hit_probabilities.get(k) for k in k_grid})
        records.append(record)
    return _frame(records, columns)


def matrix_frame(matrix: IndistinguishabilityMatrix) -> pd.DataFrame:
    """Square {-1, 0, 1} matrix in mean-error order."""
    frame = pd.DataFrame(matrix.cells, columns=matrix.order, dtype="int64")
    frame.insert(0, "predictor", matrix.order)
    return frame


# expectation

_EXPECTATION_COLUMNS = [
    "base", "dataset", "k", "eO_avg", "eO_opt", "R_avg", "R_opt", "eM_avg", "eM_opt", "eL_avg", "eL_opt",
]
_NORMALIZED_COLUMNS = ["base", "dataset", "k", "norm_M_avg", "norm_L_avg", "norm_M_opt", "norm_L_opt"]


def _expectation_rows(reports: Sequence[ExpectationReport]) -> List[Dict[str, Any]]:
    rows = []
    for report in sorted(reports, key=lambda r: (r.base_id, r.dataset_id)):
        for row in report.rows:
            record = row.dict()
            record["base"] = record.pop("base_id")
            record["dataset"] = record.pop("dataset_id")
            rows.append(record)
    return rows


def expectation_frame(reports: Sequence[ExpectationReport]) -> pd.DataFrame:
    return _frame(_expectation_rows(reports), _EXPECTATION_COLUMNS)


def normalized_frame(reports: Sequence[ExpectationReport]) -> pd.DataFrame:
    return _frame(_expectation_rows(reports), _NORMALIZED_COLUMNS)


# harness

def runs_frame(outcomes: Sequence[RunOutcome]) -> pd.DataFrame:
    rows = [
        {
            "strategy": o.strategy_label,
            "dataset": o.dataset_id,
            "run": o.run_index,
            "status": o.status.value,
            "mean_cv_error": o.mean_cv_error,
            "cost_spent": o.cost_spent,
            "pipeline": o.best_pipeline.render() if o.best_pipeline else "",
            "n_evaluations": o.n_evaluations,
            "n_invalid": o.n_invalid,
        }
        for o in sorted(outcomes, key=lambda o: (o.strategy_label, o.dataset_id, o.run_index))
    ]
    return _frame(rows, [
        "strategy", "dataset", "run", "status", "mean_cv_error", "cost_spent", "pipeline",
        "n_evaluations", "n_invalid",
    ])


def consistency_frame(cells: Sequence[StrategyCell]) -> pd.DataFrame:
    rows = [
        {
            "strategy": c.strategy_label,
            "dataset": c.dataset_id,
            "n_runs": c.n_runs,
            "failure_count": c.failure_count,
            "consistency": c.consistency,
            "mean_best_error": c.mean_best_error,
        }
        for c in cells
    ]
    return _frame(rows, ["strategy", "dataset", "n_runs", "failure_count", "consistency", "mean_best_error"])


def strategy_ranks_frame(ranking: StrategyRanking, partition: str = "all") -> pd.DataFrame:
    rows = [
        {"partition": partition, "strategy": s, "dataset": d, "rank": ranking.per_dataset[d][s]}
        for d in ranking.datasets
        for s in ranking.strategies
    ]
    rows += [
        {"partition": partition, "strategy": s, "dataset": "__average__", "rank": ranking.average[s]}
        for s in ranking.order()
    ]
    return _frame(rows, ["partition", "strategy", "dataset", "rank"])


def aggregate_frame(rows: Sequence[AggregateRow]) -> pd.DataFrame:
    return _frame([r.dict() for r in rows], [
        "grouping", "group", "n_strategies", "mean_consistency", "mean_failures", "mean_rank", "rank_variance",
    ])


def top_half_frame(rows: Sequence[TopHalfRow]) -> pd.DataFrame:
    return _frame([r.dict() for r in rows], ["strategy_label", "partition", "n_datasets", "fraction"])
