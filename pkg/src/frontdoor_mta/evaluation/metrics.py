"""Discrimination and calibration metrics."""

import logging
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from frontdoor_mta.errors import ContractViolation, UndefinedMetricError

logger = logging.getLogger(__name__)

LOGLOSS_CLAMP = 1e-7


def _binary(labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.float64)
    if not np.all((labels == 0) | (labels == 1)):
        raise ContractViolation("labels must be 0 or 1")
    return labels


def auc(scores, labels) -> float:
    """Rank-based ROC AUC (Mann-Whitney); tied scores count 0.5.

    Raises:
        UndefinedMetricError: Labels contain a single class
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = _binary(labels)
    if scores.shape != labels.shape:
        raise ContractViolation(f"scores {scores.shape} and labels {labels.shape} differ")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative label")
    ranks = rankdata(scores)
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def logloss(scores, labels) -> float:
    """Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7]."""
    labels = _binary(labels)
    p = np.clip(np.asarray(scores, dtype=np.float64), LOGLOSS_CLAMP, 1.0 - LOGLOSS_CLAMP)
    if p.shape != labels.shape:
        raise ContractViolation(f"scores {p.shape} and labels {labels.shape} differ")
    return float(-np.mean(labels * np.log(p) + (1.0 - labels) * np.log1p(-p)))


def gauc_with_skips(scores, labels, user_ids: Sequence[str]) -> tuple[float, int]:
    """Impression-weighted mean of per-user AUCs and the number of skipped users.

    Users with a single outcome class do not contribute and are counted as skipped.
    """
    frame = pd.DataFrame(
        {
            "score": np.asarray(scores, dtype=np.float64),
            "label": _binary(labels),
            "user": list(user_ids),
        }
    )
    total = 0.0
    weight = 0
    skipped = 0
    for _, group in frame.groupby("user", sort=True):
        try:
            value = auc(group["score"].to_numpy(), group["label"].to_numpy())
        except UndefinedMetricError:
            skipped += 1
            continue
        total += len(group) * value
        weight += len(group)
    if skipped:
        logger.info("gAUC skipped %d single-class users", skipped)
    if weight == 0:
        raise UndefinedMetricError("gAUC undefined: no user has both outcome classes")
    return total / weight, skipped


def gauc(scores, labels, user_ids: Sequence[str]) -> float:
    """Impression-weighted mean of per-user AUCs over users with both classes."""
    return gauc_with_skips(scores, labels, user_ids)[0]
