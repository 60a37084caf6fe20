"""Tests for reporting module."""

import pandas as pd
import pytest
from rich.console import Console

from frontdoor_mta.estimators import AttributionReport, CoverageSummary
from frontdoor_mta.evaluation import (
    BENCH_COLUMNS,
    BucketAuuc,
    BucketedAuucReport,
    EvalProtocol,
    MetricRow,
    stability_report,
)
from frontdoor_mta.reporting import (
    TerminalReporter,
    bench_frame,
    bucket_frame,
    curve_frame,
    read_csv_header,
    write_bench,
    write_bucket_report,
    write_coverage,
    write_curve_points,
)
from frontdoor_mta.training import BalanceReport, ComponentRatio


@pytest.fixture
def report():
    buckets = [
        BucketAuuc(index=0, e_low=0.1, e_high=0.3, n_pairs=3, auuc=0.6, curve=[0.5, 0.6, 0.7]),
        BucketAuuc(
            index=1, e_low=0.3, e_high=0.4, n_pairs=2, auuc=None, excluded=True,
            reason="zero label mass",
        ),
        BucketAuuc(index=2, e_low=0.4, e_high=0.9, n_pairs=1, auuc=1.0, curve=[1.0]),
    ]
    return BucketedAuucReport(
        buckets=buckets,
        weights=[0.75, 0.25],
        gauuc=0.75 * 0.6 + 0.25 * 1.0,
        protocol=EvalProtocol(n_buckets=3, shapley_samples=50),
        seed=2,
    )


@pytest.fixture
def rows():
    return [
        MetricRow(method="ALM-MTA", auc=0.71, logloss=0.52, gauc=0.66, avg_auuc=0.61,
                  gauuc_by_seed=[0.6, 0.62]),
        MetricRow(method="last-touch-lite", auc=0.63, logloss=0.58, gauc=0.6, avg_auuc=0.55,
                  gauuc_by_seed=[0.55, 0.55]),
    ]


def recording_reporter():
    return TerminalReporter(Console(record=True, width=120))


class TestCsvOutput:
    """Tests for CSV writers."""

    def test_bench_frame_columns(self, rows):
        frame = bench_frame(rows)
        assert list(frame.columns) == list(BENCH_COLUMNS)
        assert list(frame.index) == ["ALM-MTA", "last-touch-lite"]

    def test_bench_file_round_trip(self, rows, tmp_path):
        path = write_bench(tmp_path / "out" / "bench.csv", rows, "abc")
        assert read_csv_header(path) == {"config_hash": "abc"}
        loaded = pd.read_csv(path, comment="#")
        assert list(loaded.columns) == ["method", *BENCH_COLUMNS]
        assert loaded.loc[0, "AUC"] == 0.71

    def test_bucket_frame_has_summary_row(self, report):
        frame = bucket_frame(report)
        assert frame["bucket"].tolist() == ["0", "1", "2", "gAUUC"]
        summary = frame.iloc[-1]
        assert summary["auuc"] == report.gauuc
        assert summary["n_pairs"] == 4
        assert frame.loc[1, "weight"] == 0.0
        assert frame.loc[1, "excluded"]

    def test_bucket_file_header(self, report, tmp_path):
        path = write_bucket_report(tmp_path / "gauuc.csv", report, "h1")
        header = read_csv_header(path)
        assert header == {
            "config_hash": "h1", "seed": "2", "B": "3", "K": "identity", "L": "50",
            "label_source": "oracle",
        }

    def test_curve_points(self, report, tmp_path):
        frame = curve_frame(report)
        assert len(frame) == 4
        fractions = frame[frame["bucket"] == 0]["fraction"].tolist()
        assert fractions == pytest.approx([1 / 3, 2 / 3, 1.0])
        path = write_curve_points(tmp_path / "curves.csv", report, "h1")
        assert len(pd.read_csv(path, comment="#")) == 4

    def test_coverage_file(self, tmp_path):
        reports = [
            AttributionReport(
                episode_id="e", y=1, p_full=0.4, touch_ids=["a"], omega=[3.0], mask=[True],
                delta_hat=[0.1],
            )
        ]
        path = write_coverage(tmp_path / "coverage.csv", reports, 0.54, "h2")
        frame = pd.read_csv(path, comment="#")
        assert frame.loc[0, "coverage"] == 1.0
        assert frame.loc[0, "n_positive"] == 1


class TestTerminalReporter:
    """Tests for Rich terminal output."""

    def test_benchmark_table(self, rows):
        reporter = recording_reporter()
        reporter.print_benchmark(rows)
        text = reporter.console.export_text()
        assert "ALM-MTA" in text and "last-touch-lite" in text
        assert "0.7100" in text

    def test_empty_benchmark(self):
        reporter = recording_reporter()
        reporter.print_benchmark([])
        assert "No benchmark rows" in reporter.console.export_text()

    def test_gauuc_table(self, report):
        reporter = recording_reporter()
        reporter.print_gauuc(report)
        text = reporter.console.export_text()
        assert "zero label mass" in text
        assert f"{report.gauuc:.4f}" in text

    def test_balance_table(self):
        balance = BalanceReport(
            window=10,
            ratio_band=10.0,
            components=[
                ComponentRatio(component="dml", ratio=0.5, target=0.6, low=0.06, high=6.0,
                               flagged=False),
                ComponentRatio(component="ctr", ratio=None, target=0.2, low=0.02, high=2.0,
                               flagged=False),
            ],
        )
        reporter = recording_reporter()
        reporter.print_balance(balance)
        text = reporter.console.export_text()
        assert "ok" in text and "disabled" in text

    def test_coverage_panel(self):
        reporter = recording_reporter()
        reporter.print_coverage(
            CoverageSummary(threshold=0.54, n_positive=8, coverage=0.75, mean_depth=2.5)
        )
        text = reporter.console.export_text()
        assert "75.0%" in text and "2.50" in text

    def test_stability_table(self):
        reporter = recording_reporter()
        reporter.print_stability(stability_report([[0.1, 0.2, 0.3], [0.1, 0.2, 0.4]]), [10, 100])
        assert "10 vs 100" in reporter.console.export_text()

    def test_sensitivity_table(self):
        reporter = recording_reporter()
        reporter.print_sensitivity([{"relevance": 0.3, "leakage": 0.0, "avg AUUC": 0.51}])
        text = reporter.console.export_text()
        assert "relevance" in text and "0.5100" in text
