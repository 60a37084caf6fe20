"""Minimal reverse-mode differentiation engine with finite-difference checks."""

from frontdoor_mta.autodiff import ops
from frontdoor_mta.autodiff.gradcheck import GradCheckResult, check_gradients, numerical_gradient
from frontdoor_mta.autodiff.ops import grad_reverse, scale_grad
from frontdoor_mta.autodiff.value import Value, backward, topological_order

__all__ = [
    "GradCheckResult",
    "Value",
    "backward",
    "check_gradients",
    "grad_reverse",
    "numerical_gradient",
    "ops",
    "scale_grad",
    "topological_order",
]
