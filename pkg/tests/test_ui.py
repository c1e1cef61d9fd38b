#!/usr/bin/env python3
"""
Test suite for the rich result views.
"""
import io
from unittest.mock import MagicMock, patch

import pytest
from rich.console import Console

from smalldet.gaussian_model import DValues
from smalldet.montecarlo import (
    BoundCheckReport,
    BoundCheckRow,
    CalibrationResult,
    ComplexLawReport,
    KSResult,
    LemmaCase,
    LemmaReport,
)
from smalldet.scalar_laws import GammaProductSpec, GridConfig, build_product_law
from smalldet.ui import (
    print_bound_check,
    print_complex_law,
    print_d_values,
    print_error,
    print_lemma_report,
    print_product_law,
    print_stabilization,
)

SMALL_GRID = GridConfig(step=2.0 ** -5, u_min=-40.0, u_max=6.0, t_min=-40.0, t_max=12.0)


def _console(width: int = 200) -> Console:
    return Console(file=io.StringIO(), width=width, color_system=None)


def _text(console: Console) -> str:
    return console.file.getvalue()


def _row(eps: float, verdict: str) -> BoundCheckRow:
    return BoundCheckRow(
        eps=eps,
        n=2,
        m=2,
        spec_hash="abc123",
        trials=1000,
        hits=42,
        p_hat=0.042,
        ci_low=0.03,
        ci_high=0.06,
        bound=0.25,
        verdict=verdict,
    )


@pytest.mark.unit
class TestDValueViews:
    """Test d_k tables."""

    def test_print_d_values(self):
        console = _console()
        print_d_values(DValues((1.0, 0.25), n=2, m=2), "iid", console)
        text = _text(console)
        assert "Residual variances for iid (n=2, m=2)" in text
        assert "0.25" in text
        assert "prod d_k^(1/2) = 0.5" in text
        assert "does not apply" not in text

    def test_zero_value_warns(self):
        console = _console()
        print_d_values(DValues((1.0, 0.0), n=2, m=2), "dense(cov.txt)", console)
        assert "d_k = 0 for k in [2]" in _text(console)

    def test_heading_not_wrapped_to_table_width(self):
        console = _console(width=80)
        print_d_values(DValues((1.0, 0.25), n=2, m=2), "dense(cov.txt)", console)
        lines = [line.strip() for line in _text(console).splitlines()]
        assert "Residual variances for dense(cov.txt) (n=2, m=2)" in lines

    def test_print_stabilization(self):
        console = _console()
        rows = [DValues((1.0, 0.5), n=2, m=2), DValues((1.0, 0.75), n=2, m=3)]
        print_stabilization(rows, console)
        text = _text(console)
        assert "d_1" in text and "d_2" in text
        assert "0.75" in text

    def test_stabilization_empty(self):
        console = _console()
        print_stabilization([], console)
        assert _text(console) == ""


@pytest.mark.unit
class TestReportViews:
    """Test the views for product laws and Monte Carlo reports."""

    def test_print_product_law(self):
        table = build_product_law(1, SMALL_GRID)
        console = _console()
        print_product_law(table, [0.1, 2.0], with_asymptotic=True, console=console)
        text = _text(console)
        assert "Product law" in text
        assert "n = 1" in text
        assert "asymptotic" in text
        assert "error estimate" in text

    def test_print_bound_check(self):
        report = BoundCheckReport(
            rows=[_row(0.2, "pass"), _row(0.1, "fail")],
            estimates=[],
            d_values=DValues((1.0, 1.0), n=2, m=2),
            error_estimate=1e-9,
            variant="square",
        )
        console = _console()
        print_bound_check(report, console)
        text = _text(console)
        assert "Bound check (square, prod d_k^(1/2) = 1)" in text
        assert "42/1000" in text
        assert "pass" in text and "fail" in text
        assert "table error estimate" in text

    def test_print_lemma_report(self):
        report = LemmaReport(
            cases=[
                LemmaCase(0, 2, 3, "zero-column", 1.5, 0.0, 0.0),
                LemmaCase(1, 2, 2, "dependent-rows", 0.0, None, None),
            ]
        )
        console = _console()
        print_lemma_report(report, console)
        text = _text(console)
        assert "cases: 2 (identity skipped on 1 singular cases)" in text
        assert "Column-append identity" in text

    def test_print_complex_law_with_calibration(self):
        law = GammaProductSpec((1.0, 2.0), 1.0)
        ks = KSResult(statistic=0.004, sample_size=10_000, p_value_bound=0.8)
        worse = GammaProductSpec((0.5, 1.0), 1.0)
        report = ComplexLawReport(
            n=2,
            trials=10_000,
            convention="unit-complex",
            method="convolution",
            law=law,
            ks=ks,
            calibration=CalibrationResult(
                spec=law,
                ks=ks,
                candidates=[(worse, KSResult(0.2, 10_000, 0.0)), (law, ks)],
            ),
        )
        console = _console()
        print_complex_law(report, console)
        text = _text(console)
        assert "consistent" in text
        assert "Calibration candidates" in text
        assert "0.5, 1" in text

    def test_print_complex_law_rejected(self):
        report = ComplexLawReport(
            n=1,
            trials=10_000,
            convention="unit-per-part",
            method="montecarlo",
            law=GammaProductSpec((3.0,), 2.0),
            ks=KSResult(statistic=0.3, sample_size=10_000, p_value_bound=0.0),
        )
        console = _console()
        print_complex_law(report, console)
        text = _text(console)
        assert "rejected" in text
        assert "Calibration" not in text


@pytest.mark.unit
class TestPrintError:
    @patch("smalldet.ui.Console")
    def test_default_console_is_stderr(self, mock_console_class):
        mock_console = MagicMock()
        mock_console_class.return_value = mock_console

        print_error("boom")

        mock_console_class.assert_called_once_with(stderr=True)
        mock_console.print.assert_called_once_with("[red]Error: boom[/red]")

    def test_given_console(self):
        console = _console()
        print_error("bad spec", console)
        assert "Error: bad spec" in _text(console)
