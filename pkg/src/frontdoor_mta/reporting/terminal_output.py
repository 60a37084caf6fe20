"""Terminal output for benchmark, evaluation and training reports using Rich."""

from typing import Optional, Sequence

from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from frontdoor_mta.estimators.attribution import CoverageSummary
from frontdoor_mta.evaluation.auuc import BucketedAuucReport
from frontdoor_mta.evaluation.stability import StabilityReport
from frontdoor_mta.evaluation.suite import BENCH_COLUMNS, MetricRow
from frontdoor_mta.training.balance import BalanceReport


class TerminalReporter:
    """Render experiment results as Rich tables."""

    def __init__(self, console: Optional[Console] = None):
        """Initialize reporter with a Rich console.

        Args:
            console: Console to print to (stdout by default)
        """
        self.console = console or Console()

    def print_run_header(self, title: str, config_hash: str, run_id: str):
        text = Text()
        text.append("Run: ", style="bold")
        text.append(f"{run_id}\n")
        text.append("Config hash: ", style="bold")
        text.append(config_hash[:16])
        self.console.print(Panel(text, title=f"[bold]{title}[/bold]", border_style="blue"))

    def print_benchmark(self, rows: Sequence[MetricRow]):
        """Print the method comparison table.

        Args:
            rows: One metric row per method
        """
        if not rows:
            self.console.print("[yellow]No benchmark rows[/yellow]")
            return

        best_auc = max(r.auc for r in rows)
        table = Table(title="Benchmark", show_header=True, header_style="bold magenta")
        table.add_column("Method", style="cyan", no_wrap=True)
        for column in BENCH_COLUMNS:
            table.add_column(column, justify="right")

        for row in rows:
            values = row.bench_values()
            style = "bold green" if row.auc == best_auc else None
            table.add_row(row.method, *(f"{values[c]:.4f}" for c in BENCH_COLUMNS), style=style)

        self.console.print(table)
        self.console.print()

    def print_gauuc(self, report: BucketedAuucReport):
        """Print per-bucket AUUC and the aggregate.

        Args:
            report: Grouped-AUUC report of one protocol seed
        """
        table = Table(
            title=f"Grouped AUUC (seed {report.seed})",
            show_header=True,
            header_style="bold magenta",
        )
        table.add_column("Bucket", justify="right", style="cyan")
        table.add_column("Propensity", justify="right")
        table.add_column("Pairs", justify="right")
        table.add_column("Weight", justify="right", style="yellow")
        table.add_column("AUUC", justify="right", style="green")

        weights = iter(report.weights)
        for b in report.buckets:
            if b.excluded:
                table.add_row(str(b.index), "-", str(b.n_pairs), "-", f"[dim]{b.reason}[/dim]")
                continue
            table.add_row(
                str(b.index),
                f"{b.e_low:.3f}-{b.e_high:.3f}",
                str(b.n_pairs),
                f"{next(weights):.3f}",
                f"{b.auuc:.4f}",
            )
        table.add_row("[bold]gAUUC[/bold]", "", "", "1.000", f"[bold]{report.gauuc:.4f}[/bold]")
        self.console.print(table)
        self.console.print()

    def print_balance(self, report: BalanceReport):
        table = Table(
            title=f"Loss balance (last {report.window} steps, band x{report.ratio_band:g})",
            show_header=True,
            header_style="bold magenta",
        )
        table.add_column("Component", style="cyan")
        table.add_column("Ratio to main", justify="right")
        table.add_column("Target", justify="right")
        table.add_column("Status")
        for c in report.components:
            if c.ratio is None:
                table.add_row(c.component, "-", f"{c.target:g}", "[dim]disabled[/dim]")
                continue
            status = "[red]out of band[/red]" if c.flagged else "[green]ok[/green]"
            table.add_row(c.component, f"{c.ratio:.3g}", f"{c.target:g}", status)
        self.console.print(table)
        self.console.print()

    def print_coverage(self, summary: CoverageSummary):
        text = Text()
        text.append("Positive episodes: ", style="bold")
        text.append(f"{summary.n_positive}\n")
        text.append("Coverage: ", style="bold")
        text.append(f"{summary.coverage:.1%} at match >= {summary.threshold:g}\n")
        text.append("Mean depth: ", style="bold")
        text.append(f"{summary.mean_depth:.2f} touches")
        self.console.print(
            Panel(text, title="[bold]Attribution coverage[/bold]", border_style="blue")
        )
        self.console.print()

    def print_stability(self, report: StabilityReport, seeds: Sequence[int]):
        table = Table(title="Seed stability", show_header=True, header_style="bold magenta")
        table.add_column("Seeds", style="cyan")
        table.add_column("KS", justify="right")
        table.add_column("Overlap", justify="right")
        for p in report.pairs:
            table.add_row(
                f"{seeds[p.first]} vs {seeds[p.second]}", f"{p.ks:.4f}", f"{p.overlap:.3f}"
            )
        table.add_row("[bold]max KS[/bold]", f"[bold]{report.max_ks:.4f}[/bold]", "")
        self.console.print(table)
        self.console.print()

    def print_sensitivity(self, rows: Sequence[dict]):
        """Print the proxy-quality sweep.

        Args:
            rows: Dicts with relevance, leakage and metric values
        """
        if not rows:
            self.console.print("[yellow]No sensitivity results[/yellow]")
            return
        table = Table(title="Proxy sensitivity", show_header=True, header_style="bold magenta")
        columns = list(rows[0].keys())
        for column in columns:
            table.add_column(column, justify="right")
        for row in rows:
            table.add_row(
                *(f"{row[c]:.4f}" if isinstance(row[c], float) else str(row[c]) for c in columns)
            )
        self.console.print(table)
        self.console.print()
