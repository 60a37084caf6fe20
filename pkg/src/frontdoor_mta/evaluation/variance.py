"""Empirical check that conditioning on the proxy reduces outcome variance."""

import logging
from typing import Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from frontdoor_mta.errors import ContractViolation
from frontdoor_mta.scm.models import Episode

logger = logging.getLogger(__name__)

MIN_CELL = 20


class VarianceCheck(BaseModel):
    var_without: float
    var_with: float
    holds: bool
    tolerance: float
    n_used: int
    cells_dropped: int


def episode_frame(
    episodes: Sequence[Episode], x_bins: int = 4, proxy_bins: int = 4
) -> pd.DataFrame:
    """Discretized (x, t, y_prime, y) per non-empty episode.

    ``t`` is the most frequent cluster (lowest id on ties), ``y_prime`` the binned
    maximum proxy score and ``x`` the quantile bin of the first covariate.
    """
    rows = []
    for ep in episodes:
        if not ep.touches:
            continue
        counts = np.bincount(ep.cluster_ids)
        rows.append(
            {
                "x0": ep.x[0],
                "t": int(np.argmax(counts)),
                "y_prime": min(int(max(ep.proxy_scores) * proxy_bins), proxy_bins - 1),
                "y": ep.y,
            }
        )
    frame = pd.DataFrame(rows)
    frame["x"] = pd.qcut(frame["x0"], q=x_bins, labels=False, duplicates="drop")
    return frame[["x", "t", "y_prime", "y"]]


def _within_variance(frame: pd.DataFrame, keys: list[str]) -> float:
    """Size-weighted mean of within-cell variances (ddof=0)."""
    grouped = frame.groupby(keys)["y"]
    return float((grouped.var(ddof=0) * grouped.size()).sum() / len(frame))


def variance_reduction_check(
    frame: pd.DataFrame, tolerance: float = 0.005, min_cell: int = MIN_CELL
) -> VarianceCheck:
    """Compare E[Var(Y | X, T)] with E[Var(Y | X, T, Y')].

    Units in (X, T, Y') cells with fewer than ``min_cell`` samples are dropped from
    both estimates.

    Args:
        frame: Columns x, t, y_prime, y (discrete conditioning variables)
        tolerance: Slack allowed in var_with <= var_without
        min_cell: Minimum samples per retained cell
    """
    missing = {"x", "t", "y_prime", "y"} - set(frame.columns)
    if missing:
        raise ContractViolation(f"frame lacks columns {sorted(missing)}")
    keys = ["x", "t", "y_prime"]
    sizes = frame.groupby(keys)["y"].transform("size")
    kept = frame[sizes >= min_cell]
    kept_cells = kept.groupby(keys).ngroups if len(kept) else 0
    dropped = frame.groupby(keys).ngroups - kept_cells
    if dropped:
        logger.info("Variance check dropped %d cells under %d samples", dropped, min_cell)
    if kept.empty:
        raise ContractViolation(f"no (X, T, Y') cell has {min_cell} or more samples")

    var_without = _within_variance(kept, ["x", "t"])
    var_with = _within_variance(kept, ["x", "t", "y_prime"])
    return VarianceCheck(
        var_without=var_without,
        var_with=var_with,
        holds=bool(var_with <= var_without + tolerance),
        tolerance=tolerance,
        n_used=len(kept),
        cells_dropped=int(dropped),
    )
