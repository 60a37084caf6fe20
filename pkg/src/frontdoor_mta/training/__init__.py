"""Staged training recipe, optimizers, loss balancing and multi-seed runs."""

from frontdoor_mta.training.balance import BalanceReport, ComponentRatio, balance_check
from frontdoor_mta.training.multi_seed import SeedRun, attribution_scores, multi_seed_run
from frontdoor_mta.training.optim import Adagrad, Adam
from frontdoor_mta.training.plan import COMPONENTS, STAGE_BLOCKS, STAGES, TrainPlan
from frontdoor_mta.training.trainer import (
    LOG_COLUMNS,
    TrainLog,
    TrainResult,
    batch_weights,
    calibrate_coefficients,
    compute_losses,
    read_train_log,
    staged_train,
)

__all__ = [
    "COMPONENTS",
    "LOG_COLUMNS",
    "STAGES",
    "STAGE_BLOCKS",
    "Adagrad",
    "Adam",
    "BalanceReport",
    "ComponentRatio",
    "SeedRun",
    "TrainLog",
    "TrainPlan",
    "TrainResult",
    "attribution_scores",
    "balance_check",
    "batch_weights",
    "calibrate_coefficients",
    "compute_losses",
    "multi_seed_run",
    "read_train_log",
    "staged_train",
]
