#!/usr/bin/env python3
"""
User interface module for SMALLDET.

Rich terminal tables and panels for every subcommand's results.
"""
import logging
from typing import List, Optional, Sequence

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from .gaussian_model import DValues
from .montecarlo import BoundCheckReport, ComplexLawReport, LemmaReport
from .reports import format_value
from .scalar_laws import ProductLawTable, asymptotic_product_prob, product_small_dev

logger = logging.getLogger(__name__)


def _console(console: Optional[Console]) -> Console:
    return console if console is not None else Console()


def print_d_values(
    d: DValues, spec_label: str, console: Optional[Console] = None
) -> None:
    """Table of k, d_k and the eps_0 divisor prod d_k^(1/2)."""
    console = _console(console)
    console.print(
        f"\n[bold green]Residual variances for {spec_label} (n={d.n}, m={d.m})[/bold green]"
    )
    table = Table()
    table.add_column("k", style="cyan", justify="right")
    table.add_column("d_k", style="magenta", justify="right")
    for k, value in enumerate(d.values, start=1):
        style = "red" if value == 0.0 else "magenta"
        table.add_row(str(k), f"[{style}]{format_value(value)}[/{style}]")
    console.print(table)
    console.print(
        Panel(
            f"[bold cyan]prod d_k^(1/2) = {format_value(d.epsilon0_scale)}[/bold cyan]",
            expand=False,
        )
    )
    if not d.all_positive:
        console.print(
            f"[yellow]d_k = 0 for k in {d.zero_indices()}: the rescaled bound does not apply[/yellow]"
        )


def print_stabilization(rows: Sequence[DValues], console: Optional[Console] = None) -> None:
    """d_k for a growing number of columns, one row per m."""
    console = _console(console)
    if not rows:
        return
    n = rows[0].n
    console.print(f"\n[bold green]d_k as the column count grows (n={n})[/bold green]")
    table = Table()
    table.add_column("m", style="cyan", justify="right")
    for k in range(1, n + 1):
        table.add_column(f"d_{k}", style="magenta", justify="right")
    for d in rows:
        table.add_row(str(d.m), *(format_value(v) for v in d.values))
    console.print(table)


def print_product_law(
    table: ProductLawTable,
    eps_values: Sequence[float],
    with_asymptotic: bool = False,
    console: Optional[Console] = None,
) -> None:
    """Summary panel of a product-law table with spot values at eps_values."""
    console = _console(console)
    console.print(
        Panel(
            f"[bold cyan]n = {table.n}[/bold cyan]\n"
            f"t range: [{table.t_min:g}, {table.t_max:g}]  step: {table.grid_step:g}\n"
            f"truncation: [{table.truncation_bounds[0]:g}, {table.truncation_bounds[1]:g}]\n"
            f"error estimate: {format_value(table.error_estimate)}",
            title="[bold green]Product law[/bold green]",
            expand=False,
        )
    )
    console.print("\n[bold green]P(prod |X_j| <= eps)[/bold green]")
    spots = Table()
    spots.add_column("eps", style="cyan", justify="right")
    spots.add_column("probability", style="magenta", justify="right")
    if with_asymptotic:
        spots.add_column("asymptotic", style="yellow", justify="right")
        spots.add_column("ratio", style="red", justify="right")
    for eps in eps_values:
        value = product_small_dev(table, eps)
        cells: List[str] = [format_value(float(eps)), format_value(value)]
        if with_asymptotic:
            if 0 < eps < 1:
                asymptotic = asymptotic_product_prob(table.n, eps)
                cells += [format_value(asymptotic), format_value(value / asymptotic)]
            else:
                cells += ["", ""]
        spots.add_row(*cells)
    console.print(spots)


def print_bound_check(report: BoundCheckReport, console: Optional[Console] = None) -> None:
    """One row per eps with the estimate, its interval, the bound and the verdict."""
    console = _console(console)
    console.print(
        f"\n[bold green]Bound check ({report.variant}, "
        f"prod d_k^(1/2) = {format_value(report.d_values.epsilon0_scale)})[/bold green]"
    )
    table = Table()
    for column, style in (
        ("eps", "cyan"),
        ("hits", "white"),
        ("p_hat", "magenta"),
        ("ci_low", "magenta"),
        ("ci_high", "magenta"),
        ("bound", "yellow"),
        ("verdict", "bold"),
    ):
        table.add_column(column, style=style, justify="right")
    for row in report.rows:
        verdict = "[green]pass[/green]" if row.passed else "[red]fail[/red]"
        table.add_row(
            format_value(row.eps),
            f"{row.hits}/{row.trials}",
            format_value(row.p_hat),
            format_value(row.ci_low),
            format_value(row.ci_high),
            format_value(row.bound),
            verdict,
        )
    console.print(table)
    console.print(f"[dim]table error estimate: {format_value(report.error_estimate)}[/dim]")


def print_lemma_report(report: LemmaReport, console: Optional[Console] = None) -> None:
    console = _console(console)
    skipped = sum(1 for case in report.cases if case.rhs is None)
    console.print(
        Panel(
            f"cases: {len(report.cases)} (identity skipped on {skipped} singular cases)\n"
            f"max relative gap: {format_value(report.max_relative_gap)}\n"
            f"min monotonicity margin: {format_value(report.min_margin)}",
            title="[bold green]Column-append identity[/bold green]",
            expand=False,
        )
    )


def print_complex_law(report: ComplexLawReport, console: Optional[Console] = None) -> None:
    console = _console(console)
    shapes = ", ".join(format_value(s) for s in report.law.shapes)
    status = "[green]consistent[/green]" if report.passed else "[red]rejected[/red]"
    console.print(
        Panel(
            f"n = {report.n}, samples = {report.trials}, convention = {report.convention}\n"
            f"law: prod Gamma(shape, scale={format_value(report.law.scale)}), shapes [{shapes}]\n"
            f"law CDF by {report.method}\n"
            f"KS statistic: {format_value(report.ks.statistic)}\n"
            f"p-value bound: {format_value(report.ks.p_value_bound)} ({status} at 0.01)",
            title="[bold green]det(M M*) law fit[/bold green]",
            expand=False,
        )
    )
    if report.calibration is not None:
        console.print("\n[bold green]Calibration candidates (held-out draws)[/bold green]")
        table = Table()
        table.add_column("shapes", style="cyan")
        table.add_column("KS statistic", style="magenta", justify="right")
        for spec, ks in report.calibration.candidates:
            table.add_row(
                ", ".join(format_value(s) for s in spec.shapes), format_value(ks.statistic)
            )
        console.print(table)


def print_error(message: str, console: Optional[Console] = None) -> None:
    console = console if console is not None else Console(stderr=True)
    console.print(f"[red]Error: {message}[/red]")
