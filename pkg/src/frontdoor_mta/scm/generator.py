"""Observational log generator for the X, W -> T -> M -> Y causal graph."""

import logging
import zlib
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from scipy.special import expit, log_softmax

from frontdoor_mta.errors import ConfigurationError
from frontdoor_mta.scm.models import Episode, LatentDraw, ScmConfig, TouchEvent

logger = logging.getLogger(__name__)


def stream_key(name: str) -> int:
    """Stable integer key for a named RNG sub-stream."""
    return zlib.crc32(name.encode("utf-8"))


def rng_for(seed: int, name: str, *counters: int) -> np.random.Generator:
    """Independent generator for (seed, name, counters); order-free across workers."""
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(stream_key(name), *counters))
    return np.random.default_rng(sequence)


@dataclass(frozen=True)
class StructuralParams:
    """Per-cluster loadings derived deterministically from the config seed."""

    x_loadings: np.ndarray  # (n_clusters, d_x), X -> T
    w_loadings: np.ndarray  # (n_clusters,), W -> T
    popularity: np.ndarray  # (n_clusters,), cluster intercepts
    m_direction: np.ndarray  # (d_x,), X -> M
    y_direction: np.ndarray  # (d_x,), X -> Y

    def cluster_logits(self, config: ScmConfig, x: np.ndarray, w: float) -> np.ndarray:
        """Unnormalized log-probabilities of each cluster given X=x and W=w."""
        return (
            self.popularity
            + config.beta_x * (self.x_loadings @ x)
            + config.beta_w * self.w_loadings * w
        )

    def mediator_offset(self, config: ScmConfig, x: np.ndarray) -> float:
        """X contribution to the mediator pre-activation."""
        return float(config.gamma_x * (self.m_direction @ x))

    def outcome_offset(self, config: ScmConfig, x: np.ndarray) -> float:
        """X contribution to the outcome logit."""
        return float(config.beta_xy * (self.y_direction @ x))


@lru_cache(maxsize=64)
def structural_params(config: ScmConfig) -> StructuralParams:
    """Draw the structural loadings for ``config`` from its 'structure' sub-seed."""
    rng = rng_for(config.seed, "structure")
    x_loadings = rng.standard_normal((config.n_clusters, config.d_x)) / np.sqrt(config.d_x)
    w_loadings = rng.standard_normal(config.n_clusters)
    m_direction = rng.standard_normal(config.d_x)
    m_direction /= np.linalg.norm(m_direction)
    y_direction = rng.standard_normal(config.d_x)
    y_direction /= np.linalg.norm(y_direction)
    popularity = -config.cluster_skew * np.log1p(np.arange(config.n_clusters, dtype=np.float64))
    return StructuralParams(
        x_loadings=x_loadings,
        w_loadings=w_loadings,
        popularity=popularity,
        m_direction=m_direction,
        y_direction=y_direction,
    )


class LatentStore:
    """Sealed map from latent_handle to the episode's (W, M) draws.

    Only oracle and evaluation code paths read from it; models receive bare episodes.
    """

    def __init__(self, draws: Optional[dict[str, LatentDraw]] = None):
        self._draws: dict[str, LatentDraw] = dict(draws or {})

    def __len__(self) -> int:
        return len(self._draws)

    def __contains__(self, handle: str) -> bool:
        return handle in self._draws

    def unseal(self, handle: str) -> LatentDraw:
        """Return the latent draw behind ``handle``."""
        return self._draws[handle]

    def items(self):
        """Iterate (handle, draw) in insertion order."""
        return self._draws.items()


@dataclass
class SyntheticDataset:
    """Episodes plus the sealed latents and the config that produced them."""

    config: ScmConfig
    episodes: list[Episode]
    latents: LatentStore

    def __len__(self) -> int:
        return len(self.episodes)

    def split(self, holdout_fraction: float = 0.2) -> tuple[list[Episode], list[Episode]]:
        """Deterministic user-level train/held-out split."""
        users = sorted({ep.user_id for ep in self.episodes})
        rng = rng_for(self.config.seed, "split")
        order = rng.permutation(len(users))
        n_hold = max(1, int(round(holdout_fraction * len(users))))
        held_users = {users[i] for i in order[:n_hold]}
        train = [ep for ep in self.episodes if ep.user_id not in held_users]
        held = [ep for ep in self.episodes if ep.user_id in held_users]
        return train, held


def _simulate_user(
    config: ScmConfig, params: StructuralParams, user: int, sessions: int
) -> list[tuple[Episode, LatentDraw]]:
    """Simulate every session of one user from that user's private streams."""
    x = rng_for(config.seed, "user", user).standard_normal(config.d_x)
    pathway = config.pathway_weights
    lo, hi = config.seq_len_range
    out = []

    for session in range(sessions):
        rng = rng_for(config.seed, "episode", user, session)
        w = float(rng.standard_normal())
        length = int(rng.integers(lo, hi + 1))

        log_p = log_softmax(params.cluster_logits(config, x, w))
        clusters = rng.choice(config.n_clusters, size=length, p=np.exp(log_p))
        gaps = 1 + rng.geometric(0.3, size=length)
        stamps = np.cumsum(gaps)

        eps_m = float(rng.standard_normal())
        noise = config.mediator_noise * eps_m
        m = float(expit(pathway[clusters].sum() + params.mediator_offset(config, x) + noise))
        logit = (
            config.base_rate_logit
            + config.beta_my * m
            + config.beta_w * w
            + params.outcome_offset(config, x)
        )
        y = int(rng.random() < expit(logit))

        uniform = rng.random(length)
        contribution = expit(pathway[clusters] + noise)
        shortcut = config.proxy_leakage * (y - 0.5)
        proxy = np.clip(
            config.proxy_relevance * contribution
            + (1.0 - config.proxy_relevance) * uniform
            + shortcut,
            0.0,
            1.0,
        )

        episode_id = f"u{user:06d}-s{session:02d}"
        touches = [
            TouchEvent(
                touch_id=f"{episode_id}-t{j:03d}",
                cluster_id=int(clusters[j]),
                timestamp=int(stamps[j]),
                proxy_score=float(proxy[j]),
            )
            for j in range(length)
        ]
        episode = Episode(
            episode_id=episode_id,
            user_id=f"u{user:06d}",
            x=[float(v) for v in x],
            touches=touches,
            y=y,
            latent_handle=f"lat-{episode_id}",
        )
        out.append((episode, LatentDraw(w=w, eps_m=eps_m, m=m)))

    return out


def generate(config: ScmConfig, n: int, workers: int = 1) -> SyntheticDataset:
    """Sample ``n`` episodes from the causal graph.

    Users own ``sessions_per_user`` consecutive episodes sharing covariates; each
    (user, session) pair has its own RNG stream, so the result is a pure function
    of (config, n) regardless of ``workers``.

    Args:
        config: Generative parameters
        n: Number of episodes (>= 1)
        workers: Parallel worker processes for simulation

    Returns:
        SyntheticDataset with episodes and sealed latents
    """
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")

    params = structural_params(config)
    per_user = config.sessions_per_user
    n_users = -(-n // per_user)
    sessions = [min(per_user, n - u * per_user) for u in range(n_users)]

    if workers > 1 and n_users > 1:
        chunks = Parallel(n_jobs=workers)(
            delayed(_simulate_user)(config, params, u, sessions[u]) for u in range(n_users)
        )
    else:
        chunks = [_simulate_user(config, params, u, sessions[u]) for u in range(n_users)]

    episodes = []
    draws = {}
    for chunk in chunks:
        for episode, draw in chunk:
            episodes.append(episode)
            draws[episode.latent_handle] = draw

    base_rate = np.mean([ep.y for ep in episodes])
    logger.info("Generated %d episodes for %d users (base rate %.4f)", n, n_users, base_rate)
    return SyntheticDataset(config=config, episodes=episodes, latents=LatentStore(draws))


def sensitivity_grid(
    config: ScmConfig, relevance_levels: list[float], leakage_levels: list[float]
) -> list[ScmConfig]:
    """Cross-product of configs differing only in proxy relevance and leakage.

    Args:
        config: Base configuration (its seed is shared by every variant)
        relevance_levels: Values for proxy_relevance, each in [0, 1]
        leakage_levels: Values for proxy_leakage, each >= 0

    Returns:
        One config per (relevance, leakage) pair, relevance-major order
    """
    for level in relevance_levels:
        if not 0.0 <= level <= 1.0:
            raise ConfigurationError(f"proxy_relevance level {level} outside [0, 1]")
    for level in leakage_levels:
        if level < 0.0:
            raise ConfigurationError(f"proxy_leakage level {level} must be >= 0")

    return [
        config.model_copy(update={"proxy_relevance": float(rho), "proxy_leakage": float(leak)})
        for rho, leak in product(relevance_levels, leakage_levels)
    ]
