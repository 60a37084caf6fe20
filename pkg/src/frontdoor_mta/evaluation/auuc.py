"""Propensity-stratified grouped AUUC over (user, treatment-cluster) pairs.

Pipeline: treatment clustering -> per-cluster exposure propensity -> quantile buckets
-> Shapley uplift labels per pair -> per-bucket AUUC -> size-weighted gAUUC.
"""

import logging
from collections import defaultdict
from typing import Callable, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from sklearn.cluster import KMeans
from sklearn.linear_model import LogisticRegression

from frontdoor_mta.errors import (
    ConfigurationError,
    DegenerateStratificationError,
    PipelineStageError,
    UndefinedMetricError,
)
from frontdoor_mta.evaluation.shapley import sampled_shapley
from frontdoor_mta.scm.generator import rng_for
from frontdoor_mta.scm.models import Episode

logger = logging.getLogger(__name__)

ScoreFunction = Callable[[Episode, frozenset], float]
EpisodeValue = Callable[[Episode], float]


class EvalProtocol(BaseModel):
    """Parameters of the grouped-AUUC protocol and the attribution summaries."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_buckets: int = Field(default=10, ge=2)
    n_treatment_clusters: Optional[int] = Field(default=None, ge=2)
    shapley_samples: int = Field(default=200, ge=1)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    label_source: Literal["oracle", "model"] = "oracle"
    propensity_c: float = Field(default=1.0, gt=0.0)
    match_threshold: float = Field(default=0.54, ge=0.0, le=1.0)
    proxy_threshold: float = Field(default=0.5, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check(self) -> "EvalProtocol":
        if not self.seeds:
            raise ValueError("protocol needs at least one seed")
        return self


class BucketAuuc(BaseModel):
    index: int
    e_low: float
    e_high: float
    n_pairs: int
    auuc: Optional[float]  # None when the bucket is excluded
    excluded: bool = False
    reason: str = ""
    curve: list[float] = []


class BucketedAuucReport(BaseModel):
    """Per-bucket AUUC values and their size-weighted aggregate."""

    buckets: list[BucketAuuc]
    weights: list[float]  # aligned with included buckets, in index order
    gauuc: float
    protocol: EvalProtocol
    seed: int

    @model_validator(mode="after")
    def _check_aggregate(self) -> "BucketedAuucReport":
        included = [b for b in self.buckets if not b.excluded]
        if len(included) != len(self.weights):
            raise ValueError("one weight per included bucket expected")
        if included and abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"bucket weights sum to {sum(self.weights)}, expected 1")
        if self.gauuc != weighted_sum(self.weights, [b.auuc for b in included]):
            raise ValueError("gauuc must equal the weighted sum of bucket AUUCs")
        return self


def weighted_sum(weights: Sequence[float], values: Sequence[float]) -> float:
    total = 0.0
    for w, v in zip(weights, values):
        total += w * v
    return total


def cluster_treatments(embeddings: np.ndarray, k: int, seed: int = 0) -> np.ndarray:
    """K-means cluster index per embedding row (fixed-seed init, at most 50 iterations)."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    distinct = len(np.unique(embeddings, axis=0))
    if k < 2 or k > distinct:
        raise ConfigurationError(f"K must satisfy 2 <= K <= {distinct} distinct touches, got {k}")
    model = KMeans(n_clusters=k, random_state=seed, n_init=1, max_iter=50)
    return model.fit_predict(embeddings).astype(np.int64)


def propensity_buckets(e_hat: Sequence[float], n_buckets: int = 10) -> np.ndarray:
    """Quantile bucket in [0, n_buckets) of every pair; equal values share a bucket.

    Raises:
        ConfigurationError: ``n_buckets`` < 2
        DegenerateStratificationError: Fewer pairs than buckets
    """
    if n_buckets < 2:
        raise ConfigurationError(f"need at least 2 buckets, got {n_buckets}")
    e_hat = np.asarray(e_hat, dtype=np.float64)
    if len(e_hat) < n_buckets:
        raise DegenerateStratificationError(
            f"{len(e_hat)} pairs cannot fill {n_buckets} propensity buckets"
        )
    cuts = np.quantile(e_hat, np.linspace(0.0, 1.0, n_buckets + 1)[1:-1])
    buckets = np.minimum(np.searchsorted(cuts, e_hat, side="right"), n_buckets - 1)
    populated = len(np.unique(buckets))
    if populated < n_buckets:
        logger.warning(
            "Degenerate propensity quantiles: %d of %d buckets populated", populated, n_buckets
        )
    return buckets.astype(np.int64)


def uplift_curve(scores: Sequence[float], labels: Sequence[float]) -> np.ndarray:
    """Normalized cumulative uplift U(k)/Z for k = 1..N in descending score order."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    z = np.abs(labels).sum()
    if len(labels) == 0 or z == 0:
        raise UndefinedMetricError("uplift curve undefined: zero total label mass")
    order = np.argsort(-scores, kind="stable")
    return np.cumsum(labels[order]) / z


def bucket_auuc(scores: Sequence[float], labels: Sequence[float]) -> float:
    """(1/N) sum_k U(k)/Z over the descending-score ranking of one bucket."""
    return float(uplift_curve(scores, labels).mean())


class Pair(BaseModel):
    user_id: str
    group: int
    x: list[float]
    episodes: list[int]  # indices into the episode list


def _group_members(cluster_map: np.ndarray) -> dict[int, frozenset]:
    members: dict[int, set] = defaultdict(set)
    for cluster, group in enumerate(cluster_map):
        members[int(group)].add(cluster)
    return {g: frozenset(c) for g, c in members.items()}


def exposure_pairs(episodes: Sequence[Episode], cluster_map: np.ndarray) -> list[Pair]:
    """(user, group) pairs with at least one exposure, sorted by user then group."""
    seen: dict[tuple[str, int], Pair] = {}
    for i, ep in enumerate(episodes):
        for group in sorted({int(cluster_map[c]) for c in ep.cluster_ids}):
            key = (ep.user_id, group)
            if key not in seen:
                seen[key] = Pair(user_id=ep.user_id, group=group, x=list(ep.x), episodes=[])
            seen[key].episodes.append(i)
    return [seen[key] for key in sorted(seen)]


def exposure_propensity(
    episodes: Sequence[Episode], cluster_map: np.ndarray, pairs: Sequence[Pair], c: float = 1.0
) -> np.ndarray:
    """P(user exposed to group | X) from one regularized logistic model per group.

    Groups exposed to every user (or none) get the empirical exposure rate.
    """
    users: dict[str, list[float]] = {}
    exposed: dict[int, set] = defaultdict(set)
    for ep in episodes:
        users.setdefault(ep.user_id, list(ep.x))
        for cluster in ep.cluster_ids:
            exposed[int(cluster_map[cluster])].add(ep.user_id)
    user_ids = sorted(users)
    X = np.array([users[u] for u in user_ids])
    row = {u: i for i, u in enumerate(user_ids)}

    probs: dict[int, np.ndarray] = {}
    for group in sorted({p.group for p in pairs}):
        labels = np.array([u in exposed[group] for u in user_ids], dtype=int)
        if labels.min() == labels.max():
            probs[group] = np.full(len(user_ids), labels.mean(), dtype=np.float64)
            continue
        model = LogisticRegression(C=c, max_iter=1000)
        model.fit(X, labels)
        probs[group] = model.predict_proba(X)[:, 1]
    return np.array([probs[p.group][row[p.user_id]] for p in pairs])


def shapley_labels(
    episodes: Sequence[Episode],
    cluster_map: np.ndarray,
    value_fn: EpisodeValue,
    samples: int,
    seed: int,
) -> dict[tuple[int, int], float]:
    """Sampled Shapley value of each present group in each episode.

    Players are the groups present in the episode; a coalition keeps the touches of its
    groups in their original order.

    Returns:
        Map from (episode index, group) to the Shapley value
    """
    members = _group_members(cluster_map)
    labels: dict[tuple[int, int], float] = {}
    for i, ep in enumerate(episodes):
        groups = sorted({int(cluster_map[c]) for c in ep.cluster_ids})
        if not groups:
            continue

        def v(coalition: frozenset, ep=ep, groups=groups) -> float:
            kept = frozenset().union(*(members[groups[j]] for j in coalition))
            return value_fn(ep.restricted_to(kept))

        shard_seed = int(rng_for(seed, f"shapley-labels/{ep.episode_id}").integers(2**31))
        estimate = sampled_shapley(v, len(groups), samples, seed=shard_seed)
        for j, group in enumerate(groups):
            labels[(i, group)] = float(estimate.phi[j])
    return labels


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(name, exc) from exc


def grouped_auuc(
    episodes: Sequence[Episode],
    score_fn: ScoreFunction,
    value_fn: EpisodeValue,
    protocol: EvalProtocol,
    n_clusters: int,
    seed: int = 0,
    embeddings: Optional[np.ndarray] = None,
) -> BucketedAuucReport:
    """Grouped AUUC of ``score_fn`` against Shapley uplift labels.

    Args:
        episodes: Evaluation episodes
        score_fn: Model uplift score of (episode, clusters of one group)
        value_fn: Expected upload of an episode, used as the Shapley coalition value
        protocol: Buckets, treatment clustering and Shapley sample count
        n_clusters: Raw cluster vocabulary size
        seed: Protocol seed (k-means init and Shapley sampling)
        embeddings: (n_clusters, d) cluster embeddings, required when treatment
            clustering is requested

    Raises:
        PipelineStageError: Any stage failure, naming the stage
    """
    def build_map() -> np.ndarray:
        k = protocol.n_treatment_clusters
        if k is None or k == n_clusters:
            return np.arange(n_clusters, dtype=np.int64)
        if embeddings is None:
            raise ConfigurationError("treatment clustering needs cluster embeddings")
        return cluster_treatments(embeddings, k, seed)

    cluster_map = _stage("cluster", build_map)
    members = _group_members(cluster_map)
    pairs = _stage("pairs", exposure_pairs, episodes, cluster_map)
    e_hat = _stage(
        "propensity", exposure_propensity, episodes, cluster_map, pairs, protocol.propensity_c
    )
    buckets = _stage("buckets", propensity_buckets, e_hat, protocol.n_buckets)
    labels_by_episode = _stage(
        "labels", shapley_labels, episodes, cluster_map, value_fn, protocol.shapley_samples, seed
    )

    # A pair is scored by its highest per-episode score: max commutes with any strictly
    # increasing transform, so only the ranks of score_fn reach the curves.
    def pair_values():
        labels = np.empty(len(pairs))
        scores = np.empty(len(pairs))
        for n, pair in enumerate(pairs):
            group = members[pair.group]
            labels[n] = np.mean([labels_by_episode[(i, pair.group)] for i in pair.episodes])
            scores[n] = max(score_fn(episodes[i], group) for i in pair.episodes)
        return labels, scores

    labels, scores = _stage("scores", pair_values)

    def aggregate() -> BucketedAuucReport:
        rows: list[BucketAuuc] = []
        for b in range(protocol.n_buckets):
            idx = np.flatnonzero(buckets == b)
            if idx.size == 0:
                rows.append(
                    BucketAuuc(
                        index=b, e_low=np.nan, e_high=np.nan, n_pairs=0, auuc=None,
                        excluded=True, reason="empty",
                    )
                )
                continue
            e_low, e_high = float(e_hat[idx].min()), float(e_hat[idx].max())
            try:
                curve = uplift_curve(scores[idx], labels[idx])
            except UndefinedMetricError as exc:
                logger.warning("Bucket %d excluded: %s", b, exc)
                rows.append(
                    BucketAuuc(
                        index=b, e_low=e_low, e_high=e_high, n_pairs=int(idx.size), auuc=None,
                        excluded=True, reason="zero label mass",
                    )
                )
                continue
            rows.append(
                BucketAuuc(
                    index=b, e_low=e_low, e_high=e_high, n_pairs=int(idx.size),
                    auuc=float(curve.mean()), curve=[float(u) for u in curve],
                )
            )
        included = [r for r in rows if not r.excluded]
        if not included:
            raise UndefinedMetricError("every propensity bucket was excluded")
        total = sum(r.n_pairs for r in included)
        weights = [r.n_pairs / total for r in included]
        return BucketedAuucReport(
            buckets=rows,
            weights=weights,
            gauuc=weighted_sum(weights, [r.auuc for r in included]),
            protocol=protocol,
            seed=seed,
        )

    report = _stage("aggregate", aggregate)
    logger.info("gAUUC %.4f over %d pairs (seed %d)", report.gauuc, len(pairs), seed)
    return report
