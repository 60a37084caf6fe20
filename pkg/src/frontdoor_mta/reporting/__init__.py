"""Reporting module for terminal tables and CSV outputs."""

from frontdoor_mta.reporting.csv_output import (
    bench_frame,
    bucket_frame,
    curve_frame,
    read_csv_header,
    write_bench,
    write_bucket_report,
    write_coverage,
    write_csv,
    write_curve_points,
)
from frontdoor_mta.reporting.terminal_output import TerminalReporter

__all__ = [
    "TerminalReporter",
    "bench_frame",
    "bucket_frame",
    "curve_frame",
    "read_csv_header",
    "write_bench",
    "write_bucket_report",
    "write_coverage",
    "write_csv",
    "write_curve_points",
]
