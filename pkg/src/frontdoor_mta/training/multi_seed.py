"""Independent training runs over several seeds."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from frontdoor_mta.errors import ContractViolation
from frontdoor_mta.estimators.attribution import attribute
from frontdoor_mta.nn.config import ModelConfig
from frontdoor_mta.nn.state import ModelState
from frontdoor_mta.scm.generator import SyntheticDataset
from frontdoor_mta.training.plan import TrainPlan
from frontdoor_mta.training.trainer import TrainLog, staged_train

logger = logging.getLogger(__name__)


@dataclass
class SeedRun:
    """One seed's trained state, log and held-out attribution-score sample."""

    seed: int
    state: ModelState
    log: TrainLog
    scores: np.ndarray


def attribution_scores(state: ModelState, episodes) -> np.ndarray:
    """Flattened attributed uplifts of every non-empty episode."""
    values = []
    for ep in episodes:
        if not ep.touches:
            continue
        report = attribute(state, ep)
        values.extend(d for d in report.delta_hat if d is not None)
    return np.asarray(values, dtype=np.float64)


def _run_seed(
    dataset: SyntheticDataset,
    model_cfg: ModelConfig,
    plan: TrainPlan,
    seed: int,
    log_dir: Optional[Path],
    config_hash: str,
) -> SeedRun:
    cfg = model_cfg.model_copy(update={"seed": seed})
    log_path = Path(log_dir) / f"trainlog-seed{seed}.csv" if log_dir is not None else None
    result = staged_train(dataset, cfg, plan, log_path=log_path, config_hash=config_hash)
    scores = attribution_scores(result.state, result.held_out)
    return SeedRun(seed=seed, state=result.state, log=result.log, scores=scores)


def multi_seed_run(
    dataset: SyntheticDataset,
    model_cfg: ModelConfig,
    plan: TrainPlan,
    workers: int = 1,
    log_dir: Optional[Path] = None,
    config_hash: str = "",
) -> list[SeedRun]:
    """Train once per ``plan.seeds``; each run owns its state, RNG streams and log file.

    Returns:
        SeedRun per seed, in ``plan.seeds`` order
    """
    if not plan.seeds:
        raise ContractViolation("plan.seeds is empty")
    logger.info("Training %d seeds with %d workers", len(plan.seeds), workers)
    if workers > 1 and len(plan.seeds) > 1:
        return Parallel(n_jobs=min(workers, len(plan.seeds)))(
            delayed(_run_seed)(dataset, model_cfg, plan, seed, log_dir, config_hash)
            for seed in plan.seeds
        )
    return [_run_seed(dataset, model_cfg, plan, seed, log_dir, config_hash) for seed in plan.seeds]
