"""Distribution stability across seeds."""

from itertools import combinations
from typing import Sequence

import numpy as np
from pydantic import BaseModel
from scipy.stats import ks_2samp

from frontdoor_mta.errors import ContractViolation


class PairStability(BaseModel):
    first: int
    second: int
    ks: float
    overlap: float


class StabilityReport(BaseModel):
    pairs: list[PairStability]
    max_ks: float
    min_overlap: float


def histogram_overlap(a: np.ndarray, b: np.ndarray, bins: int = 20) -> float:
    """Shared mass of two normalized histograms on common bin edges."""
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi == lo:
        return 1.0
    edges = np.linspace(lo, hi, bins + 1)
    pa = np.histogram(a, bins=edges)[0] / len(a)
    pb = np.histogram(b, bins=edges)[0] / len(b)
    return float(np.minimum(pa, pb).sum())


def stability_report(distributions: Sequence[Sequence[float]], bins: int = 20) -> StabilityReport:
    """Pairwise two-sample KS statistics and histogram overlaps of per-seed score samples."""
    samples = [np.asarray(d, dtype=np.float64) for d in distributions]
    if len(samples) < 2:
        raise ContractViolation(f"stability needs at least 2 distributions, got {len(samples)}")
    for i, s in enumerate(samples):
        if s.size == 0:
            raise ContractViolation(f"distribution {i} is empty")

    pairs = []
    for i, j in combinations(range(len(samples)), 2):
        pairs.append(
            PairStability(
                first=i,
                second=j,
                ks=float(ks_2samp(samples[i], samples[j])[0]),
                overlap=histogram_overlap(samples[i], samples[j], bins),
            )
        )
    return StabilityReport(
        pairs=pairs,
        max_ks=max(p.ks for p in pairs),
        min_overlap=min(p.overlap for p in pairs),
    )
