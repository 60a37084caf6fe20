"""Staged training schedule."""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from frontdoor_mta.estimators.ipw import IpwConfig
from frontdoor_mta.nn.config import AnnealCurve

STAGES = ("warmup", "proxy", "anneal")
COMPONENTS = ("main", "dml", "adv", "reg", "ctr")

STAGE_BLOCKS = {
    "warmup": ("backbone", "head_ite", "propensity"),
    "proxy": ("backbone", "head_ite", "propensity", "head_proxy"),
    "anneal": ("backbone", "head_ite", "propensity", "head_proxy", "head_adv", "head_ctr"),
}


class TrainPlan(BaseModel):
    """Steps per stage, batching, loss-ratio targets and the annealing curve.

    Stage ``warmup`` trains backbone, ITE head and propensity block; ``proxy`` adds the
    proxy head; ``anneal`` adds adversary and contrastive heads with their coefficients
    and the reversal strength ramped along ``anneal_curve``.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    stage_steps: tuple[int, int, int] = (300, 200, 300)
    batch_size: int = Field(default=64, ge=2)
    target_ratio: tuple[float, float, float, float, float] = (1.0, 0.6, 4.0, 0.1, 0.2)
    ratio_band: float = Field(default=10.0, ge=1.0)
    anneal_curve: AnnealCurve = AnnealCurve()
    seeds: tuple[int, ...] = (10, 100, 1000)
    ipw: IpwConfig = IpwConfig()
    weighting: Literal["ipw", "uniform"] = "ipw"
    holdout_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    eval_every: int = Field(default=50, ge=1)
    log_every: int = Field(default=10, ge=1)
    auc_tolerance: float = Field(default=0.002, ge=0.0)
    auto_balance: bool = False
    calibration_batches: int = Field(default=4, ge=1)

    @model_validator(mode="after")
    def _check(self) -> "TrainPlan":
        if any(s < 0 for s in self.stage_steps):
            raise ValueError(f"stage_steps must be >= 0, got {self.stage_steps}")
        if any(r <= 0 for r in self.target_ratio):
            raise ValueError(f"target_ratio entries must be > 0, got {self.target_ratio}")
        return self

    @property
    def total_steps(self) -> int:
        return sum(self.stage_steps)

    def schedule(self) -> list[tuple[str, int]]:
        """(stage, step within stage) for every optimizer step in order."""
        return [(stage, k) for stage, n in zip(STAGES, self.stage_steps) for k in range(n)]

    def progress(self, stage: str, k: int) -> float:
        """Position in [0, 1] within ``stage``: 0 on its first step, 1 on its last."""
        n = self.stage_steps[STAGES.index(stage)]
        return 1.0 if n <= 1 else k / (n - 1)
