"""Counterfactual deletion attribution restricted to high-match touches."""

import json
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, model_validator
from scipy.special import expit
from scipy.stats import kendalltau

from frontdoor_mta.errors import ContractViolation
from frontdoor_mta.nn.network import contrastive_scores, predict_batch, predict_upload
from frontdoor_mta.nn.state import ModelState
from frontdoor_mta.scm.models import Episode, GroundTruth

logger = logging.getLogger(__name__)

MATCH_THRESHOLD = 0.54


class AttributionReport(BaseModel):
    """Attribution of one episode.

    ``delta_hat[j]`` is None exactly when touch j is outside the top-K mask.
    """

    episode_id: str
    y: int
    p_full: float
    touch_ids: list[str]
    omega: list[float]
    mask: list[bool]
    delta_hat: list[Optional[float]]

    @model_validator(mode="after")
    def _check_alignment(self) -> "AttributionReport":
        n = len(self.touch_ids)
        if not len(self.omega) == len(self.mask) == len(self.delta_hat) == n:
            raise ValueError("touch_ids, omega, mask and delta_hat must have equal length")
        for kept, delta in zip(self.mask, self.delta_hat):
            if kept == (delta is None):
                raise ValueError("delta_hat must be null exactly for masked-out touches")
        return self

    @property
    def depth(self) -> int:
        """Number of attributed touches."""
        return sum(self.mask)


class CoverageSummary(BaseModel):
    threshold: float
    n_positive: int
    coverage: float
    mean_depth: float


def deletion_uplift(state: ModelState, ep: Episode, j: int) -> float:
    """g(ep) - g(ep without touch j); attention is recomputed on the shortened sequence."""
    if not 0 <= j < len(ep.touches):
        raise ContractViolation(f"touch index {j} outside [0, {len(ep.touches)})")
    return predict_upload(state, ep) - predict_upload(state, ep.without(j))


def top_k_mask(omega: np.ndarray, timestamps: Sequence[int], top_k: int) -> np.ndarray:
    """Top-k touches by omega, ties to the earlier timestamp."""
    order = sorted(range(len(omega)), key=lambda j: (-omega[j], timestamps[j]))
    mask = np.zeros(len(omega), dtype=bool)
    mask[order[:top_k]] = True
    return mask


def attribute(state: ModelState, ep: Episode, top_k: Optional[int] = None) -> AttributionReport:
    """Deletion uplifts of the ``top_k`` best-matching touches of ``ep``.

    Args:
        state: Trained model
        ep: Episode with at least one touch
        top_k: Overlap filter size (defaults to the model's ``top_k``)
    """
    if not ep.touches:
        raise ContractViolation(f"episode {ep.episode_id} has no touches to attribute")
    k = state.config.top_k if top_k is None else top_k
    if k < 1:
        raise ContractViolation(f"top_k must be >= 1, got {k}")

    omega = contrastive_scores(state, ep)
    mask = top_k_mask(omega, [t.timestamp for t in ep.touches], k)
    kept = np.flatnonzero(mask)
    probs = predict_batch(state, [ep] + [ep.without(int(j)) for j in kept])
    p_full = float(probs[0])

    delta: list[Optional[float]] = [None] * len(ep.touches)
    for slot, j in enumerate(kept):
        delta[j] = p_full - float(probs[slot + 1])

    return AttributionReport(
        episode_id=ep.episode_id,
        y=ep.y,
        p_full=p_full,
        touch_ids=[t.touch_id for t in ep.touches],
        omega=[float(w) for w in omega],
        mask=[bool(m) for m in mask],
        delta_hat=delta,
    )


def attribute_episodes(
    state: ModelState,
    episodes: Sequence[Episode],
    top_k: Optional[int] = None,
    workers: int = 1,
) -> list[AttributionReport]:
    """:func:`attribute` over many episodes, in input order."""
    if workers > 1 and len(episodes) > 1:
        return Parallel(n_jobs=workers)(delayed(attribute)(state, ep, top_k) for ep in episodes)
    return [attribute(state, ep, top_k) for ep in episodes]


def coverage_summary(
    reports: Sequence[AttributionReport], threshold: float = MATCH_THRESHOLD
) -> CoverageSummary:
    """Share of positive episodes with an attributed touch whose sigmoid(omega) >= threshold.

    ``mean_depth`` averages the attributed-touch count over covered positives.
    """
    positives = [r for r in reports if r.y == 1]
    depths = []
    for r in positives:
        matched = [kept and expit(w) >= threshold for kept, w in zip(r.mask, r.omega)]
        if any(matched):
            depths.append(r.depth)
    n = len(positives)
    return CoverageSummary(
        threshold=threshold,
        n_positive=n,
        coverage=len(depths) / n if n else 0.0,
        mean_depth=float(np.mean(depths)) if depths else 0.0,
    )


def rank_agreement(
    reports: Sequence[AttributionReport], truths: Sequence[GroundTruth]
) -> float:
    """Mean Kendall tau between attributed uplifts and true uplifts.

    Only masked-in touches count; episodes with fewer than two of them, or with a
    constant ranking on either side, are skipped.
    """
    taus = []
    for report, truth in zip(reports, truths):
        idx = [j for j, kept in enumerate(report.mask) if kept]
        if len(idx) < 2:
            continue
        tau, _ = kendalltau(
            [report.delta_hat[j] for j in idx], [truth.true_uplift[j] for j in idx]
        )
        if np.isfinite(tau):
            taus.append(tau)
    if not taus:
        raise ContractViolation("no episode has two or more rankable attributed touches")
    logger.debug("Rank agreement over %d episodes", len(taus))
    return float(np.mean(taus))


def write_reports(path: Path, reports: Sequence[AttributionReport], config_hash: str) -> None:
    """Line-delimited reports; the first line carries the config hash."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"config_hash": config_hash}))
        f.write("\n")
        for report in reports:
            f.write(report.model_dump_json())
            f.write("\n")


def read_reports(path: Path) -> tuple[str, list[AttributionReport]]:
    """Inverse of :func:`write_reports`; returns (config_hash, reports)."""
    with open(path, encoding="utf-8") as f:
        lines = [line for line in f if line.strip()]
    header = json.loads(lines[0])
    reports = [AttributionReport.model_validate_json(line) for line in lines[1:]]
    return header["config_hash"], reports


class ModelAttributor:
    """Uplift-model view of a trained state: predictions, touch and pair uplifts."""

    name = "ALM-MTA"

    def __init__(self, state: ModelState):
        self.state = state

    def predict_batch(self, episodes: Sequence[Episode]) -> np.ndarray:
        return predict_batch(self.state, episodes)

    def predict(self, ep: Episode) -> float:
        return predict_upload(self.state, ep)

    def touch_uplifts(self, ep: Episode) -> np.ndarray:
        """Deletion uplift of every touch (no top-K filtering)."""
        if not ep.touches:
            return np.zeros(0)
        probs = predict_batch(self.state, [ep] + [ep.without(j) for j in range(len(ep.touches))])
        return probs[0] - probs[1:]

    def pair_uplift(self, ep: Episode, clusters: frozenset) -> float:
        """Drop in predicted upload when every touch of ``clusters`` is removed."""
        rest = frozenset(ep.cluster_ids) - clusters
        probs = predict_batch(self.state, [ep, ep.restricted_to(rest)])
        return float(probs[0] - probs[1])
