"""Identification layer: IPW weights, front-door plug-in, deletion attribution."""

from frontdoor_mta.estimators.attribution import (
    MATCH_THRESHOLD,
    AttributionReport,
    CoverageSummary,
    ModelAttributor,
    attribute,
    attribute_episodes,
    coverage_summary,
    deletion_uplift,
    rank_agreement,
    read_reports,
    top_k_mask,
    write_reports,
)
from frontdoor_mta.estimators.frontdoor import (
    MEDIATOR_BINS,
    FrontdoorSample,
    FrontdoorTables,
    bootstrap_frontdoor_variance,
    build_frontdoor_tables,
    frontdoor_do,
    frontdoor_ipw_do,
    make_sample,
    mediator_coordinate,
    naive_conditional,
    overlap_support,
    quantile_bins,
)
from frontdoor_mta.estimators.ipw import IpwConfig, episode_weights, ipw_weight, ipw_weights

__all__ = [
    "MATCH_THRESHOLD",
    "MEDIATOR_BINS",
    "AttributionReport",
    "CoverageSummary",
    "FrontdoorSample",
    "FrontdoorTables",
    "IpwConfig",
    "ModelAttributor",
    "attribute",
    "attribute_episodes",
    "bootstrap_frontdoor_variance",
    "build_frontdoor_tables",
    "coverage_summary",
    "deletion_uplift",
    "episode_weights",
    "frontdoor_do",
    "frontdoor_ipw_do",
    "ipw_weight",
    "ipw_weights",
    "make_sample",
    "mediator_coordinate",
    "naive_conditional",
    "overlap_support",
    "quantile_bins",
    "rank_agreement",
    "read_reports",
    "top_k_mask",
    "write_reports",
]
