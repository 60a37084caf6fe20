"""Frontdoor MTA - Causal Multi-Touch Attribution.

Trains an attribution network whose uplift estimates are identified through a
learned mediator (front-door adjustment), debiased with inverse propensity weights,
kept free of outcome leakage by an adversary, and evaluated against the exact
interventional oracle of a synthetic structural causal model.
"""

__version__ = "0.1.0"
__author__ = "Federica Nocera"

__all__ = ["__version__", "__author__"]
