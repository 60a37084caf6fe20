"""Finite-difference verification of backward rules."""

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from frontdoor_mta.autodiff.value import Value, backward


@dataclass
class GradCheckResult:
    """Outcome of one gradient check."""

    max_rel_error: float
    worst_param: int
    worst_index: tuple

    def passed(self, tol: float) -> bool:
        return self.max_rel_error < tol


def relative_error(analytic: np.ndarray, numeric: np.ndarray, atol: float = 1e-8) -> np.ndarray:
    """|a - n| / max(|a|, |n|, atol), elementwise."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), atol)
    return np.abs(analytic - numeric) / scale


def numerical_gradient(
    loss_fn: Callable[[], Value], param: Value, eps: float = 1e-5
) -> np.ndarray:
    """Central finite differences of ``loss_fn()`` with respect to ``param.data``."""
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        plus = loss_fn().item()
        flat[i] = original - eps
        minus = loss_fn().item()
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * eps)
    return grad


def check_gradients(
    loss_fn: Callable[[], Value], params: Sequence[Value], eps: float = 1e-5
) -> GradCheckResult:
    """Compare backward gradients of every param against central differences.

    Args:
        loss_fn: Builds a fresh scalar loss from ``params`` on every call
        params: Leaf values whose gradients are checked
        eps: Finite-difference step

    Returns:
        GradCheckResult with the worst relative error
    """
    for p in params:
        p.zero_grad()
    backward(loss_fn())
    analytic = [p.grad.copy() for p in params]

    worst = (0.0, -1, ())
    for k, p in enumerate(params):
        numeric = numerical_gradient(loss_fn, p, eps)
        errors = relative_error(analytic[k], numeric)
        if errors.size and errors.max() > worst[0]:
            worst = (float(errors.max()), k, np.unravel_index(errors.argmax(), errors.shape))
    return GradCheckResult(max_rel_error=worst[0], worst_param=worst[1], worst_index=worst[2])
