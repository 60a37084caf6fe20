"""Benchmark metric suite shared by the network and the baselines."""

import logging
from functools import partial
from typing import Optional, Protocol, Sequence

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel

from frontdoor_mta.evaluation.auuc import (
    BucketedAuucReport,
    EpisodeValue,
    EvalProtocol,
    grouped_auuc,
)
from frontdoor_mta.evaluation.metrics import auc, gauc, logloss
from frontdoor_mta.scm.models import Episode, ScmConfig
from frontdoor_mta.scm.oracle import oracle_do_expectation

logger = logging.getLogger(__name__)

BENCH_COLUMNS = ("AUC", "log-loss", "gAUC", "avg AUUC")


class UpliftModel(Protocol):
    name: str

    def predict_batch(self, episodes: Sequence[Episode]) -> np.ndarray: ...

    def predict(self, ep: Episode) -> float: ...

    def touch_uplifts(self, ep: Episode) -> np.ndarray: ...

    def pair_uplift(self, ep: Episode, clusters: frozenset) -> float: ...


class MetricRow(BaseModel):
    method: str
    auc: float
    logloss: float
    gauc: float
    avg_auuc: float
    gauuc_by_seed: list[float]

    def bench_values(self) -> dict[str, float]:
        """Values keyed by the benchmark column names."""
        return dict(zip(BENCH_COLUMNS, (self.auc, self.logloss, self.gauc, self.avg_auuc)))


def _oracle_value(config: ScmConfig, ep: Episode) -> float:
    return oracle_do_expectation(config, ep.x, ep.cluster_ids).value


def _oracle_pair(config: ScmConfig, ep: Episode, clusters: frozenset) -> float:
    rest = ep.restricted_to(frozenset(ep.cluster_ids) - clusters)
    return _oracle_value(config, ep) - _oracle_value(config, rest)


def oracle_value_fn(config: ScmConfig) -> EpisodeValue:
    """Interventional upload probability of an episode's touch sequence."""
    return partial(_oracle_value, config)


def oracle_pair_score(config: ScmConfig):
    """True uplift of removing a group of clusters from an episode."""
    return partial(_oracle_pair, config)


def evaluate_method(
    model: UpliftModel,
    episodes: Sequence[Episode],
    protocol: EvalProtocol,
    n_clusters: int,
    value_fn: Optional[EpisodeValue] = None,
    embeddings: Optional[np.ndarray] = None,
    workers: int = 1,
) -> tuple[MetricRow, list[BucketedAuucReport]]:
    """AUC, log-loss, gAUC and gAUUC averaged over the protocol seeds.

    Args:
        model: Predictor with uplift scores
        episodes: Held-out episodes
        protocol: Grouped-AUUC parameters
        n_clusters: Raw cluster vocabulary size
        value_fn: Shapley coalition value; defaults to the model's own prediction
        embeddings: Cluster embeddings for treatment clustering
        workers: Parallel protocol seeds (``model`` and ``value_fn`` must be picklable
            when > 1); reports come back in seed order either way
    """
    probs = model.predict_batch(episodes)
    labels = [ep.y for ep in episodes]
    value = value_fn if value_fn is not None else model.predict
    if workers > 1 and len(protocol.seeds) > 1:
        reports = Parallel(n_jobs=min(workers, len(protocol.seeds)))(
            delayed(grouped_auuc)(
                episodes, model.pair_uplift, value, protocol, n_clusters, seed, embeddings
            )
            for seed in protocol.seeds
        )
    else:
        reports = [
            grouped_auuc(
                episodes, model.pair_uplift, value, protocol, n_clusters, seed, embeddings
            )
            for seed in protocol.seeds
        ]
    gauuc_by_seed = [r.gauuc for r in reports]
    row = MetricRow(
        method=model.name,
        auc=auc(probs, labels),
        logloss=logloss(probs, labels),
        gauc=gauc(probs, labels, [ep.user_id for ep in episodes]),
        avg_auuc=float(np.mean(gauuc_by_seed)),
        gauuc_by_seed=gauuc_by_seed,
    )
    logger.info("%s: AUC %.4f gAUC %.4f avg AUUC %.4f", row.method, row.auc, row.gauc, row.avg_auuc)
    return row, reports
