"""Inverse-propensity weights with clamping."""

import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)


class IpwConfig(BaseModel):
    """Propensity clamp and batch normalization for IPW weights."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    p_floor: float = Field(default=0.01, gt=0.0, lt=1.0)
    p_ceil: float = Field(default=0.99, gt=0.0, le=1.0)
    normalize: bool = True

    @model_validator(mode="after")
    def _check_order(self) -> "IpwConfig":
        if not self.p_floor < self.p_ceil:
            raise ValueError(f"p_floor {self.p_floor} must be below p_ceil {self.p_ceil}")
        return self


def ipw_weight(cfg: IpwConfig, p_hat: float) -> float:
    """1 / clamp(p_hat, p_floor, p_ceil)."""
    clamped = min(max(float(p_hat), cfg.p_floor), cfg.p_ceil)
    if clamped != p_hat:
        logger.warning("Propensity %.4g clamped to %.4g", p_hat, clamped)
    return 1.0 / clamped


def ipw_weights(cfg: IpwConfig, p_hat: np.ndarray) -> np.ndarray:
    """Vectorized :func:`ipw_weight`; logs one warning with the clamped count."""
    p_hat = np.asarray(p_hat, dtype=np.float64)
    clamped = np.clip(p_hat, cfg.p_floor, cfg.p_ceil)
    n_clamped = int(np.count_nonzero(clamped != p_hat))
    if n_clamped:
        logger.warning(
            "Propensity clamp active for %d of %d values (floor %.3g, ceil %.3g)",
            n_clamped,
            p_hat.size,
            cfg.p_floor,
            cfg.p_ceil,
        )
    return 1.0 / clamped


def episode_weights(
    cfg: IpwConfig, touch_propensity: np.ndarray, segments: np.ndarray, n_episodes: int
) -> np.ndarray:
    """Per-episode IPW weight: geometric mean of the touch-level weights.

    The geometric mean is the product of the touch weights taken to the power
    1/length. The weight of a length-L sequence stays on the scale of a single touch,
    so long journeys do not dominate a batch the way the full product would. Every
    touch counts, unlike a max or last-touch rule. For single-touch episodes it is the
    usual 1/e(X) weight. Episodes without touches get weight 1. With ``cfg.normalize``
    the weights are rescaled to mean 1 over the batch.

    Args:
        cfg: Clamp settings
        touch_propensity: P(T'=c_j | X) of each touch (n,)
        segments: Episode row of each touch (n,)
        n_episodes: Batch size
    """
    log_w = np.log(ipw_weights(cfg, touch_propensity))
    totals = np.zeros(n_episodes)
    counts = np.zeros(n_episodes)
    np.add.at(totals, segments, log_w)
    np.add.at(counts, segments, 1.0)
    weights = np.exp(totals / np.maximum(counts, 1.0))
    if cfg.normalize:
        weights = weights / weights.mean()
    return weights
