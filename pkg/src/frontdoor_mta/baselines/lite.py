"""Simplified benchmark baselines, labeled "-lite" in reports."""

import logging
from typing import Sequence

import numpy as np
from sklearn.linear_model import LinearRegression, LogisticRegression, Ridge

from frontdoor_mta.estimators.attribution import ModelAttributor
from frontdoor_mta.nn.config import ModelConfig
from frontdoor_mta.scm.generator import SyntheticDataset
from frontdoor_mta.scm.models import Episode
from frontdoor_mta.training.plan import TrainPlan
from frontdoor_mta.training.trainer import staged_train

logger = logging.getLogger(__name__)

PROB_CLIP = 1e-6


def cluster_counts(episodes: Sequence[Episode], n_clusters: int) -> np.ndarray:
    """(N, n_clusters) touch counts per cluster."""
    counts = np.zeros((len(episodes), n_clusters))
    for i, ep in enumerate(episodes):
        for c in ep.cluster_ids:
            counts[i, c] += 1.0
    return counts


class DeletionBaseline:
    """Touch and pair uplifts as prediction drops under deletion."""

    name = "baseline"

    def predict_batch(self, episodes: Sequence[Episode]) -> np.ndarray:
        raise NotImplementedError

    def predict(self, ep: Episode) -> float:
        return float(self.predict_batch([ep])[0])

    def touch_uplifts(self, ep: Episode) -> np.ndarray:
        if not ep.touches:
            return np.zeros(0)
        probs = self.predict_batch([ep] + [ep.without(j) for j in range(len(ep.touches))])
        return probs[0] - probs[1:]

    def pair_uplift(self, ep: Episode, clusters: frozenset) -> float:
        rest = frozenset(ep.cluster_ids) - clusters
        probs = self.predict_batch([ep, ep.restricted_to(rest)])
        return float(probs[0] - probs[1])


class LastTouchLite(DeletionBaseline):
    """Conversion rate of the last touch's cluster (Laplace-smoothed)."""

    name = "last-touch-lite"

    def __init__(self, n_clusters: int, smoothing: float = 1.0):
        self.n_clusters = n_clusters
        self.smoothing = smoothing
        self.rates = np.zeros(n_clusters)
        self.base_rate = 0.0

    def fit(self, episodes: Sequence[Episode]) -> "LastTouchLite":
        y = np.array([ep.y for ep in episodes], dtype=np.float64)
        self.base_rate = float(y.mean())
        hits = np.zeros(self.n_clusters)
        totals = np.zeros(self.n_clusters)
        for ep, label in zip(episodes, y):
            if ep.touches:
                hits[ep.cluster_ids[-1]] += label
                totals[ep.cluster_ids[-1]] += 1.0
        prior = self.smoothing * self.base_rate
        self.rates = (hits + prior) / (totals + self.smoothing)
        return self

    def predict_batch(self, episodes: Sequence[Episode]) -> np.ndarray:
        return np.array(
            [self.rates[ep.cluster_ids[-1]] if ep.touches else self.base_rate for ep in episodes]
        )

    def touch_uplifts(self, ep: Episode) -> np.ndarray:
        """All credit to the final touch."""
        uplifts = np.zeros(len(ep.touches))
        if ep.touches:
            uplifts[-1] = self.predict(ep) - self.base_rate
        return uplifts


class LogisticLite(DeletionBaseline):
    """Logistic regression on covariates and per-cluster touch counts."""

    name = "logistic-lite"

    def __init__(self, n_clusters: int, c: float = 1.0, seed: int = 0):
        self.n_clusters = n_clusters
        self.model = LogisticRegression(C=c, max_iter=2000, random_state=seed)

    def _features(self, episodes: Sequence[Episode]) -> np.ndarray:
        x = np.array([ep.x for ep in episodes], dtype=np.float64)
        return np.hstack([x, cluster_counts(episodes, self.n_clusters)])

    def fit(self, episodes: Sequence[Episode]) -> "LogisticLite":
        self.model.fit(self._features(episodes), [ep.y for ep in episodes])
        return self

    def predict_batch(self, episodes: Sequence[Episode]) -> np.ndarray:
        return self.model.predict_proba(self._features(episodes))[:, 1]


class DmlLite(DeletionBaseline):
    """Two-stage residualization: outcome and treatment counts on X, then residual on residual."""

    name = "dml-lite"

    def __init__(self, n_clusters: int, seed: int = 0):
        self.n_clusters = n_clusters
        self.outcome = LogisticRegression(max_iter=2000, random_state=seed)
        self.treatment = Ridge(alpha=1.0)
        self.effect = LinearRegression()

    def fit(self, episodes: Sequence[Episode]) -> "DmlLite":
        x = np.array([ep.x for ep in episodes], dtype=np.float64)
        y = np.array([ep.y for ep in episodes], dtype=np.float64)
        counts = cluster_counts(episodes, self.n_clusters)
        self.outcome.fit(x, y)
        self.treatment.fit(x, counts)
        y_res = y - self.outcome.predict_proba(x)[:, 1]
        t_res = counts - self.treatment.predict(x)
        self.effect.fit(t_res, y_res)
        return self

    def predict_batch(self, episodes: Sequence[Episode]) -> np.ndarray:
        x = np.array([ep.x for ep in episodes], dtype=np.float64)
        t_res = cluster_counts(episodes, self.n_clusters) - self.treatment.predict(x)
        p = self.outcome.predict_proba(x)[:, 1] + self.effect.predict(t_res)
        return np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)


def train_sequence_lite(
    dataset: SyntheticDataset, model_cfg: ModelConfig, plan: TrainPlan
) -> ModelAttributor:
    """The attribution network trained with warm-up only, uniform weights and no DML term."""
    steps = plan.stage_steps[0] + plan.stage_steps[1] + plan.stage_steps[2]
    naive_plan = plan.model_copy(update={"stage_steps": (steps, 0, 0), "weighting": "uniform"})
    naive_cfg = model_cfg.model_copy(update={"lambda_dml": 0.0})
    result = staged_train(dataset, naive_cfg, naive_plan)
    attributor = ModelAttributor(result.state)
    attributor.name = "seq-lite"
    return attributor


def fit_baselines(
    dataset: SyntheticDataset, train: Sequence[Episode], model_cfg: ModelConfig, plan: TrainPlan
) -> list:
    """Fit every "-lite" baseline on ``train``; the sequence model trains on ``dataset``."""
    n_clusters = dataset.config.n_clusters
    models = [
        LastTouchLite(n_clusters).fit(train),
        LogisticLite(n_clusters, seed=model_cfg.seed).fit(train),
        DmlLite(n_clusters, seed=model_cfg.seed).fit(train),
        train_sequence_lite(dataset, model_cfg, plan),
    ]
    logger.info("Fitted baselines: %s", ", ".join(m.name for m in models))
    return models
