"""Windowed loss-ratio check against the target magnitudes."""

from typing import Optional

import numpy as np
from pydantic import BaseModel

from frontdoor_mta.errors import ContractViolation
from frontdoor_mta.training.plan import COMPONENTS, TrainPlan
from frontdoor_mta.training.trainer import TrainLog


class ComponentRatio(BaseModel):
    component: str
    ratio: Optional[float]  # None when the component was disabled in the window
    target: float
    low: float
    high: float
    flagged: bool


class BalanceReport(BaseModel):
    window: int
    ratio_band: float
    components: list[ComponentRatio]

    @property
    def flags(self) -> list[str]:
        return [c.component for c in self.components if c.flagged]


def balance_check(
    log: TrainLog,
    window: int,
    target_ratio: tuple[float, ...] = TrainPlan().target_ratio,
    ratio_band: float = TrainPlan().ratio_band,
) -> BalanceReport:
    """Compare the last ``window`` records of each weighted component to ``main``.

    A component is flagged when mean(lambda_k * L_k) / mean(L_main) falls outside
    [target_k / band, target_k * band] (targets taken relative to the main target).
    Components whose coefficient was zero throughout the window are reported with
    ``ratio=None`` and never flagged.

    Raises:
        ContractViolation: ``window`` < 1 or the log has fewer records
    """
    if window < 1 or len(log) < window:
        raise ContractViolation(
            f"balance window {window} needs that many log entries, have {len(log)}"
        )
    frame = log.to_frame().tail(window)
    main = float(frame["main"].mean())
    if main <= 0:
        raise ContractViolation("main loss is zero over the window; ratios undefined")

    rows = []
    for i, name in enumerate(COMPONENTS[1:], start=1):
        target = target_ratio[i] / target_ratio[0]
        low, high = target / ratio_band, target * ratio_band
        lam = frame[f"lambda_{name}"].to_numpy(dtype=np.float64)
        if np.all(np.nan_to_num(lam) == 0):
            rows.append(
                ComponentRatio(
                    component=name, ratio=None, target=target, low=low, high=high, flagged=False
                )
            )
            continue
        ratio = float(frame[name].mean()) / main
        rows.append(
            ComponentRatio(
                component=name,
                ratio=ratio,
                target=target,
                low=low,
                high=high,
                flagged=not low <= ratio <= high,
            )
        )
    return BalanceReport(window=window, ratio_band=ratio_band, components=rows)
