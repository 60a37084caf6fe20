"""Data models for synthetic episodes, touchpoints and oracle ground truth."""

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

MAX_CLUSTERS = 10_000


class ScmConfig(BaseModel):
    """Generative parameters of the synthetic causal graph X, W -> T -> M -> Y, Y'."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    d_x: int = Field(default=3, ge=1)
    n_clusters: int = Field(default=8, ge=2, le=MAX_CLUSTERS)
    seq_len_range: tuple[int, int] = (2, 6)
    beta_w: float = 1.5  # W -> T and W -> Y
    beta_tm: Optional[tuple[float, ...]] = None  # T -> M, one weight per cluster
    beta_my: float = 3.0
    proxy_relevance: float = Field(default=0.8, ge=0.0, le=1.0)
    proxy_leakage: float = Field(default=0.0, ge=0.0)
    base_rate_logit: float = -1.5
    seed: int = 7

    beta_x: float = 1.0  # X -> T
    gamma_x: float = 0.0  # X -> M
    beta_xy: float = 0.5  # X -> Y
    mediator_noise: float = Field(default=0.5, ge=0.0)
    sessions_per_user: int = Field(default=4, ge=1)
    cluster_skew: float = Field(default=0.0, ge=0.0)
    enumeration_bins: int = Field(default=101, ge=2)
    oracle_mc_draws: int = Field(default=1_000_000, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _default_pathway_weights(cls, data):
        """Fill beta_tm with an evenly spaced ramp when not given."""
        if isinstance(data, dict) and data.get("beta_tm") is None:
            n_clusters = data.get("n_clusters", 8)
            if isinstance(n_clusters, int) and n_clusters >= 2:
                data = dict(data)
                data["beta_tm"] = tuple(float(v) for v in np.linspace(-0.5, 1.5, n_clusters))
        return data

    @model_validator(mode="after")
    def _check_dimensions(self) -> "ScmConfig":
        """Enforce sequence-length ordering and one pathway weight per cluster."""
        lo, hi = self.seq_len_range
        if lo < 1 or lo > hi:
            raise ValueError(
                f"seq_len_range must satisfy 1 <= min <= max, got {self.seq_len_range}"
            )
        if self.beta_tm is None or len(self.beta_tm) != self.n_clusters:
            raise ValueError(
                f"beta_tm needs exactly n_clusters={self.n_clusters} entries, "
                f"got {None if self.beta_tm is None else len(self.beta_tm)}"
            )
        if not all(np.isfinite(self.beta_tm)):
            raise ValueError("beta_tm entries must be finite")
        return self

    @property
    def pathway_weights(self) -> np.ndarray:
        """beta_tm as a float64 array."""
        return np.asarray(self.beta_tm, dtype=np.float64)


class TouchEvent(BaseModel):
    """One consumed touchpoint with its cluster and per-touch proxy match score."""

    model_config = ConfigDict(frozen=True)

    touch_id: str
    cluster_id: int = Field(ge=0)
    timestamp: int
    proxy_score: float = Field(ge=0.0, le=1.0)


class Episode(BaseModel):
    """One observational record: covariates, ordered touches, binary outcome.

    Latent confounder and mediator draws are never stored here; ``latent_handle``
    keys into the sealed latent store used by oracle and evaluation code.
    """

    model_config = ConfigDict(frozen=True)

    episode_id: str
    user_id: str
    x: list[float]
    touches: list[TouchEvent]
    y: int = Field(ge=0, le=1)
    latent_handle: str

    @model_validator(mode="after")
    def _check_order(self) -> "Episode":
        """Touches must be strictly increasing by timestamp."""
        stamps = [t.timestamp for t in self.touches]
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise ValueError(f"touches of {self.episode_id} are not strictly time-ordered")
        return self

    @property
    def cluster_ids(self) -> list[int]:
        """Cluster ids in sequence order."""
        return [t.cluster_id for t in self.touches]

    @property
    def proxy_scores(self) -> list[float]:
        """Per-touch proxy scores in sequence order."""
        return [t.proxy_score for t in self.touches]

    def without(self, j: int) -> "Episode":
        """Copy with touch ``j`` removed."""
        touches = self.touches[:j] + self.touches[j + 1 :]
        return self.model_copy(update={"touches": touches})

    def restricted_to(self, clusters) -> "Episode":
        """Copy keeping only touches whose cluster is in ``clusters``, order preserved."""
        keep = set(clusters)
        touches = [t for t in self.touches if t.cluster_id in keep]
        return self.model_copy(update={"touches": touches})


class LatentDraw(BaseModel):
    """Oracle-only latent values of one episode."""

    model_config = ConfigDict(frozen=True)

    w: float
    eps_m: float
    m: float


class GroundTruth(BaseModel):
    """Exact interventional quantities for one episode."""

    p_do_full: float = Field(ge=0.0, le=1.0)
    p_do_minus: list[float]
    true_uplift: list[float]

    @classmethod
    def from_probabilities(cls, p_do_full: float, p_do_minus: list[float]) -> "GroundTruth":
        """Build with true_uplift[j] = p_do_full - p_do_minus[j]."""
        return cls(
            p_do_full=p_do_full,
            p_do_minus=list(p_do_minus),
            true_uplift=[p_do_full - p for p in p_do_minus],
        )

    @model_validator(mode="after")
    def _check_identity(self) -> "GroundTruth":
        """Uplift must equal the exact difference of probabilities."""
        if len(self.p_do_minus) != len(self.true_uplift):
            raise ValueError("p_do_minus and true_uplift lengths differ")
        for p, u in zip(self.p_do_minus, self.true_uplift):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")
            if u != self.p_do_full - p:
                raise ValueError("true_uplift must equal p_do_full - p_do_minus")
        return self


def validate_episode(ep: Episode, n_clusters: int) -> None:
    """Raise ValueError when a touch references a cluster outside [0, n_clusters)."""
    for touch in ep.touches:
        if touch.cluster_id >= n_clusters:
            raise ValueError(
                f"episode {ep.episode_id}: cluster {touch.cluster_id} outside [0, {n_clusters})"
            )
