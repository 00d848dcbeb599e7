"""
Command-line interface.

Every subcommand validates its inputs and renders all of its reports in
memory before writing any file. Exit status is 0 on success, 1 on bad input
and 2 on an internal fault.
"""
import json
import logging
import sys
from pathlib import Path

import click
import pandas as pd

from .challenge import challenge_table, indistinguishability_matrix
from .config import RunConfig, load_run_config
from .errors import InputError, MetaReduceError
from .expectation import expectation_report
from .harness.analysis import (
    aggregate_report,
    nemenyi_analysis,
    partition_by_tractability,
    rank_strategies,
    summarize_runs,
    top_half_fractions,
)
from .harness.matrix import StrategyInputs, prior_best_pipelines, run_matrix
from .harness.search import SearchBudget
from .harness.surface import RecordedResponse, ResponseSurface, SurfaceManifest
from .landmarking import landmark_results, select_landmarkers
from .meta.store import MetaKnowledgeBase, ingest
from .meta.synth import SampleSynthesizer
from .ranking import build_ranking, cross_base_correlations
from .reports import (
    ReportWriter,
    aggregate_frame,
    aggregates_frame,
    challenge_frame,
    consistency_frame,
    correlations_frame,
    counts_frame,
    expectation_frame,
    leaderboard_frame,
    matrix_frame,
    normalized_frame,
    rank_distribution_frame,
    rankings_frame,
    runs_frame,
    similarity_frame,
    strategy_ranks_frame,
    top_half_frame,
)
from .space.components import Roster
from .space.strategies import parse_labels
from .utils._types import *
from .utils.logs import general_logger, set_level

EXIT_OK, EXIT_INPUT, EXIT_FAULT = 0, 1, 2


def _load_bases(config: RunConfig, minimum: int = 1) -> List[MetaKnowledgeBase]:
    if len(config.bases) < minimum:
        raise InputError(f"at least {minimum} --base file(s) required, got {len(config.bases)}")
    roster = Roster.from_json(config.roster) if config.roster else None
    return [
        ingest(
            path,
            folds=config.folds,
            roster=roster,
            percent=config.percent,
            credit_base_learners=config.credit_base_learners
        )
        for path in config.bases
    ]


def _datasets(config: RunConfig, universe: Sequence[DatasetId]) -> List[DatasetId]:
    if not config.datasets:
        return list(universe)
    unknown = sorted(set(config.datasets) - set(universe))
    if unknown:
        raise InputError(f"unknown dataset(s): {', '.join(unknown)}")
    return sorted(set(config.datasets))


def _config(ctx: click.Context, **flags: Any) -> RunConfig:
    return load_run_config(ctx.obj.get("config_path"), flags)


def base_options(func: Callable) -> Callable:
    """Options shared by every subcommand that reads meta-knowledge bases."""
    options = [
        click.option("--base", "bases", default=None, help="Comma-separated record files (CSV or JSON lines)."),
        click.option("--roster", default=None, help="Roster manifest (JSON)."),
        click.option("--folds", type=int, default=None, help="Cross-validation folds per base."),
        click.option("--percent/--fraction", "percent", default=None, help="Error rates are given in percent."),
        click.option("--credit-base-learners/--no-credit-base-learners", default=None,
                     help="Credit base learners inside meta-predictor pipelines."),
        click.option("--filter", "pipeline_filter", type=click.Choice(["all", "single_only", "multi_only"]),
                     default=None, help="Pipelines entering aggregates and rankings."),
        click.option("--out", default=None, help="Output directory."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.option("--config", "config_path", default=None, help="JSON or YAML run configuration.")
@click.option("--verbose", is_flag=True, default=False, help="Log at DEBUG level.")
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], verbose: bool) -> None:
    """Meta-knowledge driven configuration-space reduction."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    if verbose:
        set_level(logging.DEBUG)


@cli.command("ingest")
@base_options
@click.pass_context
def cmd_ingest(ctx: click.Context, **flags: Any) -> None:
    """Validate record files and write per-cell aggregates and counts."""
    config = _config(ctx, **flags)
    writer = ReportWriter(config.out)
    for base in _load_bases(config):
        writer.add_frame(f"aggregates_{base.base_id}.csv", aggregates_frame(base, config.pipeline_filter))
        writer.add_frame(f"counts_{base.base_id}.csv", counts_frame(base, config.pipeline_filter))
    writer.commit()


@cli.command("rank")
@base_options
@click.option("--key", type=click.Choice(["mean", "best"]), default=None, help="Cell statistic ranked.")
@click.option("--drop-penalty-cells/--keep-penalty-cells", default=None,
              help="Leave unevaluated cells out of cross-base correlations.")
@click.pass_context
def cmd_rank(ctx: click.Context, **flags: Any) -> None:
    """Per-dataset rankings, the leaderboard and cross-base correlations."""
    config = _config(ctx, **flags)
    bases = _load_bases(config)
    writer = ReportWriter(config.out)
    for i, base in enumerate(bases):
        table = build_ranking(base, config.pipeline_filter, config.key)
        suffix = "" if i == 0 else f"_{base.base_id}"
        writer.add_frame(f"rankings{suffix}.csv", rankings_frame(table))
        writer.add_frame(f"leaderboard{suffix}.csv", leaderboard_frame(table))
        writer.add_frame(f"rank_distribution{suffix}.csv", rank_distribution_frame(table))
    if len(bases) > 1:
        report = cross_base_correlations(
            bases[0], bases[1],
            drop_penalty_cells=config.drop_penalty_cells,
            pipeline_filter=config.pipeline_filter
        )
        writer.add_frame("correlations.csv", correlations_frame([report]))
    writer.commit()


@cli.command("similar")
@base_options
@click.option("--landmarkers", type=int, default=None, help="Number of landmarker predictors.")
@click.option("--dataset", "datasets", default=None, help="Comma-separated datasets to match.")
@click.pass_context
def cmd_similar(ctx: click.Context, **flags: Any) -> None:
    """Leave-one-out landmark similarity of every dataset."""
    config = _config(ctx, **flags)
    base = _load_bases(config)[0]
    landmarkers = select_landmarkers(base, config.landmarkers)
    general_logger.info(f"Landmarkers: {', '.join(landmarkers)}")
    results = landmark_results(base, landmarkers)
    wanted = _datasets(config, base.datasets)
    writer = ReportWriter(config.out)
    writer.add_frame("similarity.csv", similarity_frame({d: results[d] for d in wanted}))
    writer.commit()


@cli.command("challenge")
@base_options
@click.option("--k", "k_grid", default=None, help="Pool sizes, e.g. 1,4,8,10,19.")
@click.option("--alpha", type=float, default=None, help="Significance level.")
@click.option("--alpha-rule", type=click.Choice(["conventional", "literal"]), default=None,
              help="`conventional`: indistinguishable when p > alpha; `literal`: when p > 1 - alpha.")
@click.pass_context
def cmd_challenge(ctx: click.Context, **flags: Any) -> None:
    """Skewness, performer groups and random-culling hit odds per dataset."""
    config = _config(ctx, **flags)
    bases = _load_bases(config)
    base_a = bases[0]
    base_b = bases[1] if len(bases) > 1 else None
    rows = challenge_table(base_a, base_b, config.k_grid, config.alpha, config.alpha_rule)
    grouping = base_b or base_a
    writer = ReportWriter(config.out)
    writer.add_frame(
        "challenge.csv",
        challenge_frame(rows, config.k_grid, base_a.base_id, base_b.base_id if base_b else None)
    )
    for row in rows:
        matrix = indistinguishability_matrix(grouping, row.dataset_id, config.alpha, config.alpha_rule,
                                             config.pipeline_filter)
        writer.add_frame(f"matrix_{row.dataset_id}.csv", matrix_frame(matrix))
    writer.commit()


@cli.command("expect")
@base_options
@click.option("--k", "k_grid", default=None, help="Pool sizes, e.g. 1,4,8,10,19,30.")
@click.option("--dataset", "datasets", default=None, help="Comma-separated datasets.")
@click.option("--landmarkers", type=int, default=None, help="Number of landmarker predictors.")
@click.pass_context
def cmd_expect(ctx: click.Context, **flags: Any) -> None:
    """Expected average and optimal losses of every strategy family."""
    config = _config(ctx, **flags)
    reports = []
    for base in _load_bases(config):
        table = build_ranking(base, config.pipeline_filter, config.key)
        datasets = _datasets(config, base.datasets)
        try:
            neighbours = landmark_results(base, select_landmarkers(base, config.landmarkers))
        except InputError as e:
            general_logger.warning(f"No landmarked expectations for `{base.base_id}`: {e.message}")
            neighbours = {}
        for d in datasets:
            result = neighbours.get(d)
            reports.append(expectation_report(
                table, d, config.k_grid, most_similar=result.most_similar if result else None
            ))
    writer = ReportWriter(config.out)
    writer.add_frame("expectation.csv", expectation_frame(reports))
    writer.add_frame("normalized.csv", normalized_frame(reports))
    writer.commit()


@cli.command("simulate")
@base_options
@click.option("--surface", default=None, help="Surface manifest (JSON); records are replayed without one.")
@click.option("--strategies", default=None, help="Comma-separated strategy labels.")
@click.option("--seeds", default=None, help="Seeds, e.g. 1..5 or 1,2,3.")
@click.option("--budget", type=float, default=None, help="Cost units per run.")
@click.option("--landmark-deduction", type=float, default=None, help="Extra cost units deducted from every run.")
@click.option("--dataset", "datasets", default=None, help="Comma-separated datasets.")
@click.option("--alpha", type=float, default=None, help="Significance level.")
@click.option("--failure-policy", type=click.Choice(["penalize", "drop"]), default=None,
              help="Treatment of failed runs in a strategy's mean error.")
@click.option("--optimizer", type=click.Choice(["replay", "surrogate"]), default=None, help="Search optimizer.")
@click.option("--invalid-fraction", type=float, default=None, help="Share of invalid proposals when replaying.")
@click.option("--invalid-cost", type=float, default=None, help="Cost of an unfiltered invalid proposal when replaying.")
@click.option("--landmarkers", type=int, default=None, help="Number of landmarker predictors.")
@click.option("--tractability-threshold", type=int, default=None,
              help="Evaluations above which a dataset counts as lightweight.")
@click.option("--workers", type=int, default=None, help="Parallel worker threads.")
@click.option("--key", type=click.Choice(["mean", "best"]), default=None, help="Cell statistic ranked.")
@click.pass_context
def cmd_simulate(ctx: click.Context, **flags: Any) -> None:
    """Run the strategy x dataset x seed matrix and analyse the outcomes."""
    config = _config(ctx, **flags)
    labels = parse_labels(config.strategies)

    manifest = SurfaceManifest.from_json(config.surface) if config.surface else None
    if config.bases:
        bases = _load_bases(config)
    elif manifest is not None:
        roster = Roster.from_json(config.roster) if config.roster else None
        bases = [manifest.to_meta_base("planted", roster)]
    else:
        raise InputError("simulate needs --base or --surface")

    if manifest is not None:
        surface = ResponseSurface(manifest)
        universe = sorted(set(manifest.datasets) & set(bases[0].datasets))
    else:
        surface = RecordedResponse(bases[0], config.invalid_fraction, config.invalid_cost)
        universe = bases[0].datasets
    datasets = _datasets(config, universe)

    inputs = StrategyInputs(
        bases,
        roster=Roster.from_json(config.roster) if config.roster else None,
        pipeline_filter=config.pipeline_filter,
        key=config.key,
        landmarker_count=config.landmarkers,
        prior_best=prior_best_pipelines(bases[0])
    )
    budget = SearchBudget(
        total_cost=config.budget,
        landmark_deduction=config.landmark_deduction,
        runs_per_strategy=len(config.seeds),
        folds=bases[0].folds
    )
    outcomes = run_matrix(
        inputs, surface, labels, datasets, config.seeds, budget,
        workers=config.workers, optimizer=config.optimizer
    )

    cells = summarize_runs(outcomes, config.alpha, config.failure_policy)
    ranking = rank_strategies(cells, datasets)
    partitions = partition_by_tractability(bases[0], config.tractability_threshold)
    partitions = {name: [d for d in members if d in datasets] for name, members in partitions.items()}

    writer = ReportWriter(config.out)
    writer.add_frame("runs.csv", runs_frame(outcomes))
    writer.add_frame("consistency.csv", consistency_frame(cells))
    writer.add_frame("aggregate.csv", aggregate_frame(aggregate_report(cells, ranking)))
    writer.add_frame("top_half.csv", top_half_frame(top_half_fractions(ranking, partitions)))

    rank_frames = [strategy_ranks_frame(ranking)]
    partition_results = {}
    for name, members in sorted(partitions.items()):
        if not members:
            continue
        part = rank_strategies([c for c in cells if c.dataset_id in members], members)
        rank_frames.append(strategy_ranks_frame(part, name))
        if len(part.strategies) > 1:
            partition_results[name] = nemenyi_analysis(part, config.alpha).to_json()
    writer.add_frame("strategy_ranks.csv", pd.concat(rank_frames, ignore_index=True))

    if len(ranking.strategies) > 1:
        writer.add_json("nemenyi.json", nemenyi_analysis(ranking, config.alpha))
        writer.add_json("nemenyi_partitions.json", partition_results)
    else:
        general_logger.warning("A single strategy has no critical-difference analysis.")
    writer.commit()


_SUMMARY_SOURCES = (
    "leaderboard.csv", "correlations.csv", "similarity.csv", "challenge.csv",
    "expectation.csv", "normalized.csv", "runs.csv", "consistency.csv", "strategy_ranks.csv",
)


def build_summary(report_dir: Union[str, Path]) -> Dict[str, Any]:
    """Join the reports found in a directory into one experiment summary."""
    report_dir = Path(report_dir)
    found = {name: pd.read_csv(report_dir / name) for name in _SUMMARY_SOURCES if (report_dir / name).exists()}
    nemenyi_path = report_dir / "nemenyi.json"
    if not found and not nemenyi_path.exists():
        raise InputError(f"no reports found in `{report_dir}`")

    summary: Dict[str, Any] = {"files": {name: int(len(frame)) for name, frame in sorted(found.items())}}
    if "leaderboard.csv" in found:
        summary["leaderboard"] = found["leaderboard.csv"].sort_values("position")["predictor"].tolist()
    if "similarity.csv" in found:
        frame = found["similarity.csv"].dropna(subset=["most_similar"])
        summary["most_similar"] = dict(zip(frame["new_dataset"], frame["most_similar"]))
    if "normalized.csv" in found:
        means = found["normalized.csv"].groupby("k")[["norm_M_avg", "norm_L_avg", "norm_M_opt", "norm_L_opt"]].mean()
        summary["mean_normalized_by_k"] = {
            int(k): {c: (None if pd.isna(v) else round(float(v), 6)) for c, v in row.items()}
            for k, row in means.iterrows()
        }
    if "consistency.csv" in found:
        per_strategy = found["consistency.csv"].groupby("strategy")[["consistency", "failure_count", "mean_best_error"]].mean()
        summary["strategies"] = {
            s: {c: round(float(v), 6) for c, v in row.items()} for s, row in per_strategy.iterrows()
        }
    if "strategy_ranks.csv" in found:
        frame = found["strategy_ranks.csv"]
        average = frame[(frame["partition"] == "all") & (frame["dataset"] == "__average__")]
        summary["strategy_order"] = average.sort_values(["rank", "strategy"])["strategy"].tolist()
    if nemenyi_path.exists():
        nemenyi = json.loads(nemenyi_path.read_text(encoding="utf-8"))
        summary["nemenyi"] = {k: nemenyi[k] for k in ("alpha", "cd", "significant_pairs", "groups")}
    return summary


@cli.command("report")
@click.option("--out", default=None, help="Directory holding the reports to join.")
@click.pass_context
def cmd_report(ctx: click.Context, **flags: Any) -> None:
    """Join the reports of earlier subcommands into `summary.json`."""
    config = _config(ctx, **flags)
    writer = ReportWriter(config.out)
    writer.add_json("summary.json", build_summary(config.out))
    writer.commit()


@cli.command("synth")
@click.option("--out", default="data/samples", show_default=True, help="Output directory.")
@click.option("--exist-ok", is_flag=True, default=False, help="Overwrite existing sample files.")
def cmd_synth(out: str, exist_ok: bool) -> None:
    """Write the planted sample bases, roster, surface and manifest."""
    SampleSynthesizer().write(out, exist_ok=exist_ok)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and map failures to exit codes."""
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="metareduce", standalone_mode=False)
        return result if isinstance(result, int) else EXIT_OK
    except click.exceptions.Abort:
        click.echo("Aborted.", err=True)
        return EXIT_INPUT
    except click.ClickException as e:
        click.echo(f"Error: {e.format_message()}", err=True)
        return EXIT_INPUT
    except MetaReduceError as e:
        click.echo(e.oneline(), err=True)
        return EXIT_INPUT
    except (FileNotFoundError, FileExistsError, IsADirectoryError) as e:
        click.echo(f"{e.__class__.__name__}: {e}", err=True)
        return EXIT_INPUT
    except Exception as e:
        general_logger.debug("Internal fault", exc_info=True)
        click.echo(f"Internal error: {e.__class__.__name__}: {e}", err=True)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
