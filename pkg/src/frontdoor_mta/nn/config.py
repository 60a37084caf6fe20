"""Model hyperparameters and annealing curves."""

import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


class AnnealCurve(BaseModel):
    """Monotone ramp from 0 to 1 over a stage.

    ``ramp_fraction`` is the share of the stage spent ramping; the curve holds 1
    afterwards.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["linear", "cosine"] = "linear"
    ramp_fraction: float = Field(default=0.5, gt=0.0, le=1.0)

    def __call__(self, progress: float) -> float:
        """Curve value at ``progress`` in [0, 1] through the stage."""
        if progress <= 0.0:
            return 0.0
        ramp = min(progress / self.ramp_fraction, 1.0)
        if self.kind == "cosine":
            return 0.5 - 0.5 * math.cos(math.pi * ramp)
        return ramp


class ModelConfig(BaseModel):
    """Widths, loss coefficients and optimizer settings of the attribution network."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    embed_dim: int = Field(default=16, ge=1)
    backbone_widths: tuple[int, ...] = (32, 16)
    mediator_dim: int = Field(default=8, ge=1)
    adversary_width: int = Field(default=8, ge=1)

    lambda_dml: float = Field(default=0.6, ge=0.0)
    lambda_adv: float = Field(default=4.0, ge=0.0)
    lambda_reg: float = Field(default=1e-3, ge=0.0)
    lambda_ctr: float = Field(default=1e-3, ge=0.0)
    lambda_proxy: float = Field(default=1.0, ge=0.0)

    tau_ctr: float = Field(default=0.1, gt=0.0)
    top_k: int = Field(default=5, ge=1)
    proxy_bins: int = Field(default=11, ge=2)
    grl_target: float = Field(default=1.0, ge=0.0)
    grl_schedule: AnnealCurve = AnnealCurve()

    lr_dense: float = Field(default=1e-5, gt=0.0)
    lr_sparse: float = Field(default=5e-4, gt=0.0)
    init_scale: float = Field(default=0.1, ge=0.0)
    residual: bool = False
    proxy_passthrough: float = Field(default=1.0, ge=0.0, le=1.0)
    ctr_passthrough: float = Field(default=0.0, ge=0.0, le=1.0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_widths(self) -> "ModelConfig":
        """Hidden widths must be positive and end at the touch-embedding width."""
        if not self.backbone_widths or any(w < 1 for w in self.backbone_widths):
            raise ValueError(f"backbone_widths must be non-empty and >= 1: {self.backbone_widths}")
        if self.backbone_widths[-1] != self.embed_dim:
            raise ValueError(
                f"last backbone width {self.backbone_widths[-1]} must equal embed_dim "
                f"{self.embed_dim}"
            )
        for name in ("lambda_dml", "lambda_adv", "lambda_reg", "lambda_ctr", "lambda_proxy"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        return self
