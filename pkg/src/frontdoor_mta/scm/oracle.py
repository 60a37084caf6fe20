"""Exact interventional oracle for the synthetic causal graph.

Under do(T=t) the W -> T and X -> T edges are severed, so

    P(Y=1 | do(T=t), X=x) = E_{W, eps}[ sigmoid(b + beta_my * M(t, x, eps) + beta_w * W + xy) ]

with W and the mediator noise eps independent standard normals. Both are discretized on
equal-mass quantile grids and enumerated exactly; a Monte-Carlo path covers grids too
large to enumerate.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Optional, Sequence

import numpy as np
from scipy.special import expit, log_softmax
from scipy.stats import norm

from frontdoor_mta.errors import CapabilityError, ContractViolation
from frontdoor_mta.scm.generator import rng_for, structural_params
from frontdoor_mta.scm.models import Episode, GroundTruth, ScmConfig

logger = logging.getLogger(__name__)

MAX_ENUMERATION_STATES = 1_000_000
MC_CHUNK = 100_000


@dataclass(frozen=True)
class OracleEstimate:
    """Oracle value with its standard error (zero for exact enumeration)."""

    value: float
    std_error: float
    method: Literal["enumeration", "monte_carlo"]


@lru_cache(maxsize=16)
def quantile_grid(bins: int) -> np.ndarray:
    """Midpoint quantiles of the standard normal on ``bins`` equal-mass cells."""
    return norm.ppf((np.arange(bins) + 0.5) / bins)


def _check_clusters(config: ScmConfig, t: Sequence[int]) -> None:
    for cluster in t:
        if not 0 <= int(cluster) < config.n_clusters:
            raise ContractViolation(f"cluster id {cluster} outside [0, {config.n_clusters})")


def _response(config: ScmConfig, x: np.ndarray, pathway_sum: float, w, eps) -> np.ndarray:
    params = structural_params(config)
    m = expit(pathway_sum + params.mediator_offset(config, x) + config.mediator_noise * eps)
    logit = (
        config.base_rate_logit
        + config.beta_my * m
        + config.beta_w * w
        + params.outcome_offset(config, x)
    )
    return expit(logit)


def oracle_do_expectation(
    config: ScmConfig,
    x: Sequence[float],
    t: Sequence[int],
    method: Optional[Literal["enumeration", "monte_carlo"]] = None,
) -> OracleEstimate:
    """P(Y=1 | do(T=t), X=x) under the generating graph.

    Args:
        config: Generative parameters
        x: Covariate vector
        t: Cluster-id sequence to intervene with (may be empty)
        method: Force a computation path; by default enumeration when feasible

    Returns:
        OracleEstimate with the interventional probability
    """
    _check_clusters(config, t)
    x = np.asarray(x, dtype=np.float64)
    pathway_sum = float(config.pathway_weights[np.asarray(t, dtype=int)].sum()) if len(t) else 0.0

    states = config.enumeration_bins**2
    if method is None:
        method = "enumeration" if states <= MAX_ENUMERATION_STATES else "monte_carlo"

    if method == "enumeration":
        if states > MAX_ENUMERATION_STATES:
            if config.oracle_mc_draws == 0:
                raise CapabilityError(
                    f"{states} joint latent states exceed the enumeration limit "
                    f"{MAX_ENUMERATION_STATES} and the Monte-Carlo budget is 0"
                )
            return oracle_do_expectation(config, x, t, method="monte_carlo")
        grid = quantile_grid(config.enumeration_bins)
        values = _response(config, x, pathway_sum, grid[:, None], grid[None, :])
        return OracleEstimate(value=float(values.mean()), std_error=0.0, method="enumeration")

    if config.oracle_mc_draws == 0:
        raise CapabilityError("Monte-Carlo oracle requested with a draw budget of 0")

    rng = rng_for(config.seed, "oracle")
    total = 0.0
    total_sq = 0.0
    remaining = config.oracle_mc_draws
    while remaining > 0:
        size = min(MC_CHUNK, remaining)
        values = _response(
            config, x, pathway_sum, rng.standard_normal(size), rng.standard_normal(size)
        )
        total += values.sum()
        total_sq += np.square(values).sum()
        remaining -= size

    n = config.oracle_mc_draws
    mean = total / n
    variance = max(total_sq / n - mean**2, 0.0)
    return OracleEstimate(
        value=float(mean), std_error=float(np.sqrt(variance / n)), method="monte_carlo"
    )


def oracle_uplift(config: ScmConfig, ep: Episode) -> GroundTruth:
    """Exact per-touch deletion uplifts of one episode."""
    t = ep.cluster_ids
    full = oracle_do_expectation(config, ep.x, t).value
    minus = [oracle_do_expectation(config, ep.x, t[:j] + t[j + 1 :]).value for j in range(len(t))]
    return GroundTruth.from_probabilities(full, minus)


def oracle_subset_value(config: ScmConfig, ep: Episode, clusters) -> float:
    """Interventional upload probability keeping only touches of ``clusters``."""
    kept = ep.restricted_to(clusters)
    return oracle_do_expectation(config, kept.x, kept.cluster_ids).value


def observational_marginal(config: ScmConfig, draws: int = 1_000_000) -> OracleEstimate:
    """Monte-Carlo P(Y=1) under the observational (non-intervened) graph.

    Users are drawn independently, so this is the marginal each generated episode
    shares regardless of sessions_per_user.
    """
    params = structural_params(config)
    rng = rng_for(config.seed, "marginal")
    lo, hi = config.seq_len_range
    pathway = config.pathway_weights

    total = 0.0
    total_sq = 0.0
    remaining = draws
    while remaining > 0:
        size = min(MC_CHUNK, remaining)
        x = rng.standard_normal((size, config.d_x))
        w = rng.standard_normal(size)
        logits = (
            params.popularity[None, :]
            + config.beta_x * x @ params.x_loadings.T
            + config.beta_w * w[:, None] * params.w_loadings[None, :]
        )
        log_p = log_softmax(logits, axis=1)
        lengths = rng.integers(lo, hi + 1, size=size)
        gumbel = rng.gumbel(size=(size, hi, config.n_clusters))
        clusters = np.argmax(log_p[:, None, :] + gumbel, axis=2)
        mask = np.arange(hi)[None, :] < lengths[:, None]
        pathway_sum = (pathway[clusters] * mask).sum(axis=1)

        eps = rng.standard_normal(size)
        m = expit(
            pathway_sum
            + config.gamma_x * (x @ params.m_direction)
            + config.mediator_noise * eps
        )
        p = expit(
            config.base_rate_logit
            + config.beta_my * m
            + config.beta_w * w
            + config.beta_xy * (x @ params.y_direction)
        )
        total += p.sum()
        total_sq += np.square(p).sum()
        remaining -= size

    mean = total / draws
    variance = max(total_sq / draws - mean**2, 0.0)
    return OracleEstimate(
        value=float(mean), std_error=float(np.sqrt(variance / draws)), method="monte_carlo"
    )


def population_do_expectation(
    config: ScmConfig, t: Sequence[int], draws: int = 20_000
) -> OracleEstimate:
    """E_X[P(Y=1 | do(T=t), X)] averaged over the covariate distribution.

    Uses enumeration over latents for each of ``draws`` covariate samples from the
    oracle stream.
    """
    _check_clusters(config, t)
    rng = rng_for(config.seed, "oracle", 1)
    xs = rng.standard_normal((draws, config.d_x))
    params = structural_params(config)
    grid = quantile_grid(min(config.enumeration_bins, 101))
    pathway_sum = float(config.pathway_weights[np.asarray(t, dtype=int)].sum()) if len(t) else 0.0

    m_offset = config.gamma_x * (xs @ params.m_direction)
    y_offset = config.beta_xy * (xs @ params.y_direction)
    m = expit(pathway_sum + m_offset[:, None] + config.mediator_noise * grid[None, :])
    mediated = config.beta_my * m  # (draws, eps)
    confounded = config.beta_w * grid  # (w,)
    per_x = np.empty(draws)
    chunk = 256
    for start in range(0, draws, chunk):
        stop = min(start + chunk, draws)
        logit = (
            config.base_rate_logit
            + mediated[start:stop, None, :]
            + confounded[None, :, None]
            + y_offset[start:stop, None, None]
        )
        per_x[start:stop] = expit(logit).mean(axis=(1, 2))

    return OracleEstimate(
        value=float(per_x.mean()),
        std_error=float(per_x.std() / np.sqrt(draws)),
        method="enumeration",
    )
