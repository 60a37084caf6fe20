"""Typer commands: gen, train, attribute, eval, bench and sensitivity."""

import logging
import os
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
import typer
from dotenv import load_dotenv

from frontdoor_mta.baselines import fit_baselines
from frontdoor_mta.config import ConfigLoader, ExperimentConfig, config_hash
from frontdoor_mta.errors import (
    CapabilityError,
    ConfigurationError,
    DataError,
    DegenerateStratificationError,
    FrontdoorMtaError,
    NumericError,
    PipelineStageError,
    TrainingAbortedError,
    UndefinedMetricError,
    VocabularyError,
)
from frontdoor_mta.estimators import (
    ModelAttributor,
    attribute_episodes,
    coverage_summary,
    write_reports,
)
from frontdoor_mta.evaluation import (
    adversary_auc,
    episode_frame,
    evaluate_method,
    oracle_value_fn,
    proxy_auc,
    variance_reduction_check,
)
from frontdoor_mta.log import configure_logging, kv
from frontdoor_mta.nn import ModelState, load_checkpoint, save_checkpoint
from frontdoor_mta.reporting import (
    TerminalReporter,
    bench_frame,
    write_bench,
    write_bucket_report,
    write_coverage,
    write_csv,
    write_curve_points,
)
from frontdoor_mta.scm import SyntheticDataset, generate, sensitivity_grid
from frontdoor_mta.scm.io import load_dataset, read_manifest, save_dataset
from frontdoor_mta.training import staged_train

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRAINING = 4
EXIT_EVALUATION = 5

EXIT_CODES = (
    (ConfigurationError, EXIT_CONFIG),
    ((DataError, VocabularyError), EXIT_DATA),
    ((TrainingAbortedError, NumericError), EXIT_TRAINING),
    (
        (
            PipelineStageError,
            UndefinedMetricError,
            DegenerateStratificationError,
            CapabilityError,
        ),
        EXIT_EVALUATION,
    ),
)

app = typer.Typer(
    name="frontdoor-mta",
    help="Causal multi-touch attribution experiments on a synthetic structural model.",
    no_args_is_help=True,
    add_completion=False,
)

ConfigOption = typer.Option(None, "--config", "-c", help="YAML experiment file")
OutOption = typer.Option(None, "--out", "-o", help="Output directory (overrides config paths)")
SeedOption = typer.Option(None, "--seed", help="Override the generator and model seed")
WorkersOption = typer.Option(
    os.cpu_count() or 1, "--workers", "-w", min=1, help="Parallel worker cap"
)
ForceOption = typer.Option(False, "--force", help="Proceed despite a config hash mismatch")
VerboseOption = typer.Option(False, "--verbose", "-v", help="Debug logging")


def exit_code_for(exc: FrontdoorMtaError) -> int:
    for types, code in EXIT_CODES:
        if isinstance(exc, types):
            return code
    return 1


@contextmanager
def failure_exit() -> Iterator[None]:
    """Log a package error and convert it into the family's exit code."""
    try:
        yield
    except FrontdoorMtaError as exc:
        if isinstance(exc, TrainingAbortedError) and exc.snapshot_path:
            logger.error("%s (snapshot: %s)", exc, exc.snapshot_path)
        else:
            logger.error("%s", exc)
        raise typer.Exit(code=exit_code_for(exc)) from exc


def setup(
    config: Optional[Path], seed: Optional[int], verbose: bool
) -> tuple[ExperimentConfig, str]:
    """Load environment, logging and the experiment config.

    Returns:
        (config, config hash)
    """
    load_dotenv()
    configure_logging(logging.DEBUG if verbose else logging.INFO)
    cfg = ConfigLoader(config).load().with_env_paths()
    if seed is not None:
        cfg = cfg.with_seed(seed)
    digest = config_hash(cfg)
    logger.info(kv(run_id=cfg.run_id, config_hash=digest[:16], seed=cfg.scm.seed))
    return cfg, digest


def open_dataset(data_dir: Path, digest: str, force: bool) -> SyntheticDataset:
    """Load a dataset, refusing one generated under another config unless forced."""
    manifest = read_manifest(data_dir)
    if force and manifest.get("config_hash") != digest:
        logger.warning(
            "Dataset at %s carries config %s, expected %s; loading anyway",
            data_dir,
            manifest.get("config_hash"),
            digest,
        )
        return load_dataset(data_dir)
    return load_dataset(data_dir, expected_hash=digest)


def open_checkpoint(ckpt_dir: Path, digest: str, force: bool) -> ModelState:
    state, manifest = load_checkpoint(ckpt_dir, expected_hash=digest, force=force)
    logger.info(kv(checkpoint=ckpt_dir, stage=manifest["stage"], step=manifest["step"]))
    return state


def held_out(cfg: ExperimentConfig, dataset: SyntheticDataset) -> list:
    _, held = dataset.split(cfg.plan.holdout_fraction)
    if not held:
        raise DataError("held-out split is empty; increase data.n_episodes")
    return held


def value_function(cfg: ExperimentConfig, dataset: SyntheticDataset):
    """Shapley coalition value: the oracle, or None for each model's own prediction."""
    if cfg.eval.label_source == "oracle":
        return oracle_value_fn(dataset.config)
    return None


def cluster_embeddings(cfg: ExperimentConfig, state: ModelState) -> Optional[np.ndarray]:
    if cfg.eval.n_treatment_clusters is None:
        return None
    return state["backbone.cluster_table"].data.copy()


def train_and_save(
    cfg: ExperimentConfig, dataset: SyntheticDataset, digest: str, ckpt_dir: Path
) -> ModelState:
    result = staged_train(
        dataset,
        cfg.model,
        cfg.plan,
        log_path=ckpt_dir / "trainlog.csv",
        snapshot_dir=ckpt_dir / "abort",
        config_hash=digest,
    )
    last = result.log.records[-1] if len(result.log) else {"stage": "warmup", "step": 0}
    save_checkpoint(
        ckpt_dir, result.state, digest, cfg.model.seed, str(last["stage"]), int(last["step"])
    )
    return result.state


@app.command()
def gen(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    workers: int = WorkersOption,
    verbose: bool = VerboseOption,
):
    """Generate episodes, sealed latents and a manifest."""
    with failure_exit():
        cfg, digest = setup(config, seed, verbose)
        out_dir = out or cfg.paths.data_dir
        dataset = generate(cfg.scm, cfg.data.n_episodes, workers=workers)
        manifest = save_dataset(out_dir, dataset, digest)
        logger.info(kv(data_dir=out_dir, n_episodes=manifest["n_episodes"], seed=manifest["seed"]))


@app.command()
def train(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    force: bool = ForceOption,
    verbose: bool = VerboseOption,
):
    """Run the staged recipe on the dataset and write a checkpoint with its TrainLog."""
    with failure_exit():
        cfg, digest = setup(config, seed, verbose)
        dataset = open_dataset(cfg.paths.data_dir, digest, force)
        ckpt_dir = Path(out or cfg.paths.checkpoint_dir)
        train_and_save(cfg, dataset, digest, ckpt_dir)
        logger.info(kv(checkpoint=ckpt_dir))


@app.command(name="attribute")
def attribute_command(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="Checkpoint directory"),
    top_k: Optional[int] = typer.Option(None, "--top-k", min=1, help="Attribution depth"),
    force: bool = ForceOption,
    workers: int = WorkersOption,
    verbose: bool = VerboseOption,
):
    """Write per-episode attribution reports and a coverage summary."""
    with failure_exit():
        cfg, digest = setup(config, seed, verbose)
        dataset = open_dataset(cfg.paths.data_dir, digest, force)
        state = open_checkpoint(checkpoint or cfg.paths.checkpoint_dir, digest, force)
        out_dir = Path(out or cfg.paths.report_dir)

        reports = attribute_episodes(state, held_out(cfg, dataset), top_k, workers)
        write_reports(out_dir / "attributions.jsonl", reports, digest)
        threshold = cfg.eval.match_threshold
        write_coverage(out_dir / "coverage.csv", reports, threshold, digest)
        TerminalReporter().print_coverage(coverage_summary(reports, threshold))


@app.command(name="eval")
def eval_command(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="Checkpoint directory"),
    force: bool = ForceOption,
    workers: int = WorkersOption,
    verbose: bool = VerboseOption,
):
    """Score a checkpoint: metrics, grouped AUUC per protocol seed, leakage diagnostics."""
    with failure_exit():
        cfg, digest = setup(config, seed, verbose)
        dataset = open_dataset(cfg.paths.data_dir, digest, force)
        state = open_checkpoint(checkpoint or cfg.paths.checkpoint_dir, digest, force)
        out_dir = Path(out or cfg.paths.report_dir)
        episodes = held_out(cfg, dataset)

        row, reports = evaluate_method(
            ModelAttributor(state),
            episodes,
            cfg.eval,
            dataset.config.n_clusters,
            value_fn=value_function(cfg, dataset),
            embeddings=cluster_embeddings(cfg, state),
            workers=workers,
        )
        write_bench(out_dir / "metrics.csv", [row], digest)
        reporter = TerminalReporter()
        for report in reports:
            write_bucket_report(out_dir / f"gauuc-seed{report.seed}.csv", report, digest)
            write_curve_points(out_dir / f"curves-seed{report.seed}.csv", report, digest)
            reporter.print_gauuc(report)
        reporter.print_benchmark([row])

        check = variance_reduction_check(episode_frame(episodes))
        logger.info(
            kv(
                adversary_auc=adversary_auc(state, episodes),
                proxy_auc=proxy_auc(state, episodes, cfg.eval.proxy_threshold),
                var_without=check.var_without,
                var_with=check.var_with,
                variance_reduction=check.holds,
            )
        )


@app.command()
def bench(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    checkpoint: Optional[Path] = typer.Option(
        None, "--checkpoint", help="Reuse a trained checkpoint instead of training"
    ),
    force: bool = ForceOption,
    workers: int = WorkersOption,
    verbose: bool = VerboseOption,
):
    """Compare ALM-MTA against the "-lite" baselines on the held-out split."""
    with failure_exit():
        cfg, digest = setup(config, seed, verbose)
        dataset = open_dataset(cfg.paths.data_dir, digest, force)
        out_dir = Path(out or cfg.paths.report_dir)
        if checkpoint is not None:
            state = open_checkpoint(checkpoint, digest, force)
        else:
            state = train_and_save(cfg, dataset, digest, Path(cfg.paths.checkpoint_dir))

        train_eps, _ = dataset.split(cfg.plan.holdout_fraction)
        episodes = held_out(cfg, dataset)
        models = [*fit_baselines(dataset, train_eps, cfg.model, cfg.plan), ModelAttributor(state)]
        value_fn = value_function(cfg, dataset)
        embeddings = cluster_embeddings(cfg, state)
        rows = []
        for model in models:
            row, _ = evaluate_method(
                model,
                episodes,
                cfg.eval,
                dataset.config.n_clusters,
                value_fn,
                embeddings,
                workers=workers,
            )
            rows.append(row)
        write_bench(out_dir / "bench.csv", rows, digest)
        TerminalReporter().print_benchmark(rows)


@app.command()
def sensitivity(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    workers: int = WorkersOption,
    verbose: bool = VerboseOption,
):
    """Regenerate, retrain and evaluate across proxy relevance and leakage levels."""
    with failure_exit():
        cfg, digest = setup(config, seed, verbose)
        out_dir = Path(out or cfg.paths.report_dir)
        grid = sensitivity_grid(
            cfg.scm, cfg.sensitivity.relevance_levels, cfg.sensitivity.leakage_levels
        )
        rows = []
        for scm in grid:
            variant = cfg.model_copy(update={"scm": scm})
            dataset = generate(scm, cfg.data.n_episodes, workers=workers)
            state = staged_train(dataset, variant.model, variant.plan).state
            episodes = held_out(variant, dataset)
            row, _ = evaluate_method(
                ModelAttributor(state),
                episodes,
                variant.eval,
                scm.n_clusters,
                value_fn=value_function(variant, dataset),
                embeddings=cluster_embeddings(variant, state),
                workers=workers,
            )
            rows.append(
                {
                    "proxy_relevance": scm.proxy_relevance,
                    "proxy_leakage": scm.proxy_leakage,
                    **bench_frame([row]).iloc[0].to_dict(),
                    "adversary AUC": adversary_auc(state, episodes),
                    "proxy AUC": proxy_auc(state, episodes, variant.eval.proxy_threshold),
                }
            )
            logger.info(kv(relevance=scm.proxy_relevance, leakage=scm.proxy_leakage, auc=row.auc))

        write_csv(out_dir / "sensitivity.csv", pd.DataFrame(rows), {"config_hash": digest})
        TerminalReporter().print_sensitivity(rows)
