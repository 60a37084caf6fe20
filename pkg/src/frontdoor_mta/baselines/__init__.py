"""Simplified ("-lite") comparison methods for the benchmark table."""

from frontdoor_mta.baselines.lite import (
    DeletionBaseline,
    DmlLite,
    LastTouchLite,
    LogisticLite,
    cluster_counts,
    fit_baselines,
    train_sequence_lite,
)

__all__ = [
    "DeletionBaseline",
    "DmlLite",
    "LastTouchLite",
    "LogisticLite",
    "cluster_counts",
    "fit_baselines",
    "train_sequence_lite",
]
