"""Offline evaluation: AUC family, Shapley values, grouped AUUC, stability, variance."""

from frontdoor_mta.evaluation.auuc import (
    BucketAuuc,
    BucketedAuucReport,
    EvalProtocol,
    bucket_auuc,
    cluster_treatments,
    exposure_pairs,
    exposure_propensity,
    grouped_auuc,
    propensity_buckets,
    shapley_labels,
    uplift_curve,
)
from frontdoor_mta.evaluation.leakage import adversary_auc, proxy_auc
from frontdoor_mta.evaluation.metrics import auc, gauc, gauc_with_skips, logloss
from frontdoor_mta.evaluation.shapley import ShapleyEstimate, exact_shapley, sampled_shapley
from frontdoor_mta.evaluation.stability import StabilityReport, histogram_overlap, stability_report
from frontdoor_mta.evaluation.suite import (
    BENCH_COLUMNS,
    MetricRow,
    UpliftModel,
    evaluate_method,
    oracle_pair_score,
    oracle_value_fn,
)
from frontdoor_mta.evaluation.variance import VarianceCheck, episode_frame, variance_reduction_check

__all__ = [
    "BENCH_COLUMNS",
    "BucketAuuc",
    "BucketedAuucReport",
    "EvalProtocol",
    "MetricRow",
    "ShapleyEstimate",
    "StabilityReport",
    "UpliftModel",
    "VarianceCheck",
    "adversary_auc",
    "auc",
    "bucket_auuc",
    "cluster_treatments",
    "episode_frame",
    "evaluate_method",
    "exact_shapley",
    "exposure_pairs",
    "exposure_propensity",
    "gauc",
    "gauc_with_skips",
    "grouped_auuc",
    "histogram_overlap",
    "logloss",
    "oracle_pair_score",
    "oracle_value_fn",
    "propensity_buckets",
    "proxy_auc",
    "sampled_shapley",
    "shapley_labels",
    "stability_report",
    "uplift_curve",
    "variance_reduction_check",
]
