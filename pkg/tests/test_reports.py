#!/usr/bin/env python3
"""
Test suite for CSV and JSON report writers.
"""
import json

import pytest

from smalldet.errors import UsageError
from smalldet.reports import (
    BOUND_CHECK_COLUMNS,
    REPORT_FORMAT_VERSION,
    export_product_law,
    format_value,
    product_law_rows,
    render_csv,
    render_report,
    sidecar_path,
    write_text,
)
from smalldet.scalar_laws import GridConfig, build_product_law

SMALL_GRID = GridConfig(step=2.0 ** -5, u_min=-40.0, u_max=6.0, t_min=-40.0, t_max=12.0)


@pytest.mark.unit
class TestFormatting:
    """Test cell formatting and CSV layout."""

    def test_seventeen_significant_digits(self):
        assert format_value(0.1) == "0.10000000000000001"
        assert float(format_value(1 / 3)) == 1 / 3
        assert format_value(3) == "3"
        assert format_value(None) == ""
        assert format_value(True) == "true"
        assert format_value("pass") == "pass"

    def test_render_csv(self):
        text = render_csv([{"a": 1, "b": 0.5}, {"a": 2}], ["a", "b"])
        assert text == "a,b\n1,0.5\n2,\n"

    def test_render_report_json(self):
        text = render_report(
            [{"eps": 0.1, "verdict": "pass", "extra": 1}],
            ["eps", "verdict"],
            "json",
            {"seed": 0, "error": float("inf")},
        )
        document = json.loads(text)
        assert document["format_version"] == REPORT_FORMAT_VERSION
        assert document["rows"] == [{"eps": 0.1, "verdict": "pass"}]
        assert document["metadata"] == {"seed": 0, "error": "inf"}
        assert text.endswith("\n")

    def test_render_report_unknown_format(self):
        with pytest.raises(UsageError):
            render_report([], BOUND_CHECK_COLUMNS, "xml")


@pytest.mark.integration
class TestWriters:
    """Test files written to disk."""

    def test_write_text_creates_parents(self, tmp_path):
        path = write_text(tmp_path / "a" / "b" / "report.csv", "x\n")
        assert path.read_text() == "x\n"

    def test_write_text_reports_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OSError, match="file"):
            write_text(blocker / "report.csv", "x\n")

    def test_export_product_law(self, tmp_path):
        table = build_product_law(2, SMALL_GRID)
        csv_path = tmp_path / "law.csv"
        sidecar = export_product_law(table, csv_path, with_asymptotic=True)

        assert sidecar == sidecar_path(csv_path) == tmp_path / "law.json"
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "t,cdf,asymptotic,ratio"
        assert len(lines) == table.grid.size + 1

        metadata = json.loads(sidecar.read_text())
        assert metadata["n"] == 2
        assert metadata["grid_step"] == SMALL_GRID.step
        assert metadata["t_min"] == -40.0
        assert metadata["t_max"] == 12.0
        assert metadata["truncation_bounds"] == [-40.0, 6.0]
        assert metadata["error_estimate"] == table.error_estimate
        assert metadata["format_version"] == REPORT_FORMAT_VERSION

    def test_asymptotic_columns(self):
        table = build_product_law(2, SMALL_GRID)
        rows = product_law_rows(table, with_asymptotic=True)
        negative = [r for r in rows if r["t"] < -10]
        positive = [r for r in rows if r["t"] >= 0]
        assert all(r["asymptotic"] is not None for r in negative)
        assert all(r["ratio"] is None for r in positive)
        # ratio approaches 1 toward small eps
        by_t = {r["t"]: r["ratio"] for r in rows}
        assert abs(by_t[-18.0] - 1) < abs(by_t[-7.0] - 1)

    def test_export_is_reproducible(self, tmp_path):
        table = build_product_law(1, SMALL_GRID)
        export_product_law(table, tmp_path / "a.csv")
        export_product_law(table, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
