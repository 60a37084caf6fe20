"""Exact and permutation-sampled Shapley values over treatment clusters."""

import logging
from dataclasses import dataclass
from itertools import combinations
from math import factorial
from typing import Callable

import numpy as np
from joblib import Parallel, delayed

from frontdoor_mta.errors import CapabilityError, ContractViolation
from frontdoor_mta.scm.generator import rng_for

logger = logging.getLogger(__name__)

MAX_EXACT_PLAYERS = 12
SHARD_SIZE = 256

ValueFunction = Callable[[frozenset], float]


@dataclass(frozen=True)
class ShapleyEstimate:
    phi: np.ndarray
    std_error: np.ndarray
    sample_count: int  # 0 for exact enumeration

    @property
    def total(self) -> float:
        return float(self.phi.sum())


def exact_shapley(v: ValueFunction, n_players: int) -> ShapleyEstimate:
    """Shapley values by enumerating every coalition.

    Args:
        v: Value of a coalition given as a frozenset of player indices
        n_players: Number of players, at most 12
    """
    if n_players > MAX_EXACT_PLAYERS:
        raise CapabilityError(
            f"exact Shapley enumerates 2^{n_players} coalitions; "
            f"limit is {MAX_EXACT_PLAYERS} players"
        )
    if n_players < 1:
        raise ContractViolation("n_players must be >= 1")

    players = range(n_players)
    values = {
        frozenset(s): float(v(frozenset(s)))
        for size in range(n_players + 1)
        for s in combinations(players, size)
    }
    weights = [factorial(s) * factorial(n_players - s - 1) / factorial(n_players) for s in players]
    phi = np.zeros(n_players)
    for coalition, value in values.items():
        if len(coalition) == n_players:
            continue
        w = weights[len(coalition)]
        for i in players:
            if i not in coalition:
                phi[i] += w * (values[coalition | {i}] - value)
    return ShapleyEstimate(phi=phi, std_error=np.zeros(n_players), sample_count=0)


def _shard_marginals(v: ValueFunction, n_players: int, count: int, seed: int, shard: int):
    rng = rng_for(seed, "shapley", shard)
    cache: dict[frozenset, float] = {}

    def value(s: frozenset) -> float:
        if s not in cache:
            cache[s] = float(v(s))
        return cache[s]

    marginals = np.zeros((count, n_players))
    for row in range(count):
        coalition: frozenset = frozenset()
        previous = value(coalition)
        for player in rng.permutation(n_players):
            coalition = coalition | {int(player)}
            current = value(coalition)
            marginals[row, player] = current - previous
            previous = current
    return marginals


def sampled_shapley(
    v: ValueFunction, n_players: int, samples: int, seed: int = 0, workers: int = 1
) -> ShapleyEstimate:
    """Permutation-sampling Shapley estimate.

    Permutations are drawn in shards of ``SHARD_SIZE`` with one RNG stream per shard and
    reduced in shard order, so the estimate depends only on (v, n_players, samples, seed).

    Args:
        v: Coalition value function
        n_players: Number of players
        samples: Number of random permutations L (>= 1)
        seed: Sampling seed
        workers: Parallel shard workers (``v`` must be picklable when > 1)
    """
    if samples < 1:
        raise ContractViolation(f"sample count must be >= 1, got {samples}")
    if n_players < 1:
        raise ContractViolation("n_players must be >= 1")

    sizes = [min(SHARD_SIZE, samples - start) for start in range(0, samples, SHARD_SIZE)]
    if workers > 1 and len(sizes) > 1:
        parts = Parallel(n_jobs=workers)(
            delayed(_shard_marginals)(v, n_players, size, seed, shard)
            for shard, size in enumerate(sizes)
        )
    else:
        parts = [
            _shard_marginals(v, n_players, size, seed, shard)
            for shard, size in enumerate(sizes)
        ]
    marginals = np.concatenate(parts, axis=0)

    phi = marginals.mean(axis=0)
    if samples > 1:
        std_error = marginals.std(axis=0, ddof=1) / np.sqrt(samples)
    else:
        std_error = np.zeros(n_players)
    return ShapleyEstimate(phi=phi, std_error=std_error, sample_count=samples)
