"""CSV writers; every file starts with ``# key=value`` header lines."""

from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from frontdoor_mta.estimators.attribution import AttributionReport, coverage_summary
from frontdoor_mta.evaluation.auuc import BucketedAuucReport
from frontdoor_mta.evaluation.suite import BENCH_COLUMNS, MetricRow


def write_csv(path: Path, frame: pd.DataFrame, header: dict) -> Path:
    """Write ``frame`` after one comment line per header entry."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for key, value in header.items():
            f.write(f"# {key}={value}\n")
        frame.to_csv(f, index=False, lineterminator="\n")
    return path


def read_csv_header(path: Path) -> dict:
    """The ``# key=value`` lines of a file written by :func:`write_csv`."""
    header = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition("=")
            header[key] = value
    return header


def bench_frame(rows: Sequence[MetricRow]) -> pd.DataFrame:
    """One row per method with exactly the benchmark metric columns."""
    frame = pd.DataFrame([r.bench_values() for r in rows], columns=list(BENCH_COLUMNS))
    frame.index = [r.method for r in rows]
    frame.index.name = "method"
    return frame


def write_bench(path: Path, rows: Sequence[MetricRow], config_hash: str) -> Path:
    return write_csv(path, bench_frame(rows).reset_index(), {"config_hash": config_hash})


def bucket_frame(report: BucketedAuucReport) -> pd.DataFrame:
    """One row per bucket plus a summary row holding gAUUC."""
    weights = iter(report.weights)
    rows = []
    for b in report.buckets:
        rows.append(
            {
                "bucket": str(b.index),
                "e_low": b.e_low,
                "e_high": b.e_high,
                "n_pairs": b.n_pairs,
                "weight": 0.0 if b.excluded else next(weights),
                "auuc": np.nan if b.auuc is None else b.auuc,
                "excluded": b.excluded,
                "reason": b.reason,
            }
        )
    rows.append(
        {
            "bucket": "gAUUC",
            "e_low": np.nan,
            "e_high": np.nan,
            "n_pairs": sum(b.n_pairs for b in report.buckets if not b.excluded),
            "weight": 1.0,
            "auuc": report.gauuc,
            "excluded": False,
            "reason": "",
        }
    )
    return pd.DataFrame(rows)


def protocol_header(report: BucketedAuucReport, config_hash: str) -> dict:
    p = report.protocol
    return {
        "config_hash": config_hash,
        "seed": report.seed,
        "B": p.n_buckets,
        "K": p.n_treatment_clusters if p.n_treatment_clusters is not None else "identity",
        "L": p.shapley_samples,
        "label_source": p.label_source,
    }


def write_bucket_report(path: Path, report: BucketedAuucReport, config_hash: str) -> Path:
    return write_csv(path, bucket_frame(report), protocol_header(report, config_hash))


def curve_frame(report: BucketedAuucReport) -> pd.DataFrame:
    """Normalized uplift-curve points (k/N_b, U_b(k)/Z_b) per included bucket."""
    rows = []
    for b in report.buckets:
        for k, value in enumerate(b.curve, start=1):
            rows.append({"bucket": b.index, "fraction": k / b.n_pairs, "uplift": value})
    return pd.DataFrame(rows, columns=["bucket", "fraction", "uplift"])


def write_curve_points(path: Path, report: BucketedAuucReport, config_hash: str) -> Path:
    return write_csv(path, curve_frame(report), protocol_header(report, config_hash))


def write_coverage(
    path: Path, reports: Sequence[AttributionReport], threshold: float, config_hash: str
) -> Path:
    summary = coverage_summary(reports, threshold)
    frame = pd.DataFrame([summary.model_dump()])
    return write_csv(path, frame, {"config_hash": config_hash})
