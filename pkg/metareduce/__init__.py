import sys
from typing import TYPE_CHECKING

from .utils.imports import LazyModule


_import_structure = {
    "core": ["Serializable"],
    "schema": ["Schema"],
    "errors": ["MetaReduceError", "InputError", "AnalysisError"],
    "config": ["RunConfig", "load_run_config"],
    "meta": {
        "store": [
            "EvaluationRecord", "MetaKnowledgeBase", "PipelineFilter", "ingest", "aggregate",
            "evaluation_counts", "evaluation_cost_matrix", "total_evaluations", "best_full_cv", "write_records"
        ],
        "synth": ["SampleManifest", "SampleSynthesizer", "planted_hierarchy_surface"]
    },
    "space": {
        "components": ["Pipeline", "Roster", "ComponentSpec"],
        "strategies": ["StrategyLabel", "ReducedSpace", "apply_strategy", "close_dependencies", "space_size"]
    },
    "ranking": ["RankingTable", "build_ranking", "leaderboard_excluding", "cross_base_correlations", "rank_distribution"],
    "landmarking": ["LandmarkResult", "select_landmarkers", "most_similar_dataset", "landmark_results"],
    "challenge": ["skewness", "welch_p", "indistinguishability_matrix", "best_groups", "challenge_table"],
    "expectation": ["ExpectationReport", "expectation_report"],
    "harness": {
        "surface": ["ResponseSurface", "SurfaceManifest", "RecordedResponse"],
        "search": ["SearchBudget", "RunOutcome", "run_constrained_search"],
        "matrix": ["StrategyInputs", "run_matrix", "prior_best_pipelines"],
        "analysis": ["StrategyCell", "StrategyRanking", "NemenyiResult", "summarize_runs", "rank_strategies", "nemenyi_analysis",
                     "seed_means", "sign_test"]
    }
}


if TYPE_CHECKING:

    # Core
    from .core import Serializable
    from .schema import Schema
    from .errors import MetaReduceError, InputError, AnalysisError
    from .config import RunConfig, load_run_config

    # Meta-knowledge
    from .meta.store import (
        EvaluationRecord, MetaKnowledgeBase, PipelineFilter, ingest, aggregate,
        evaluation_counts, evaluation_cost_matrix, total_evaluations, best_full_cv, write_records
    )
    from .meta.synth import SampleManifest, SampleSynthesizer, planted_hierarchy_surface

    # Configuration space
    from .space.components import Pipeline, Roster, ComponentSpec
    from .space.strategies import StrategyLabel, ReducedSpace, apply_strategy, close_dependencies, space_size

    # Analyses
    from .ranking import RankingTable, build_ranking, leaderboard_excluding, cross_base_correlations, rank_distribution
    from .landmarking import LandmarkResult, select_landmarkers, most_similar_dataset, landmark_results
    from .challenge import skewness, welch_p, indistinguishability_matrix, best_groups, challenge_table
    from .expectation import ExpectationReport, expectation_report

    # Harness
    from .harness.surface import ResponseSurface, SurfaceManifest, RecordedResponse
    from .harness.search import SearchBudget, RunOutcome, run_constrained_search
    from .harness.matrix import StrategyInputs, run_matrix, prior_best_pipelines
    from .harness.analysis import (
        StrategyCell, StrategyRanking, NemenyiResult, summarize_runs, rank_strategies, nemenyi_analysis,
        seed_means, sign_test
    )

else:

    sys.modules[__name__] = LazyModule(
        __name__,
        globals()["__file__"],
        _import_structure,
        module_spec=__spec__
    )
