"""Synthetic structural causal model: data generation and interventional oracle."""

from frontdoor_mta.scm.generator import (
    LatentStore,
    SyntheticDataset,
    generate,
    rng_for,
    sensitivity_grid,
    structural_params,
)
from frontdoor_mta.scm.models import (
    Episode,
    GroundTruth,
    LatentDraw,
    ScmConfig,
    TouchEvent,
    validate_episode,
)
from frontdoor_mta.scm.oracle import (
    OracleEstimate,
    observational_marginal,
    oracle_do_expectation,
    oracle_subset_value,
    oracle_uplift,
    population_do_expectation,
)

__all__ = [
    "Episode",
    "GroundTruth",
    "LatentDraw",
    "LatentStore",
    "OracleEstimate",
    "ScmConfig",
    "SyntheticDataset",
    "TouchEvent",
    "generate",
    "observational_marginal",
    "oracle_do_expectation",
    "oracle_subset_value",
    "oracle_uplift",
    "population_do_expectation",
    "rng_for",
    "sensitivity_grid",
    "structural_params",
    "validate_episode",
]
