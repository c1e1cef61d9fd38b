#!/usr/bin/env python3
"""
Report writers for SMALLDET.

CSV tables print every float with 17 significant digits; JSON documents use
the round-trip representation of each double. No file carries a timestamp,
so fixed-seed runs reproduce byte-identical output.
"""
import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

from .errors import UsageError
from .scalar_laws import ProductLawTable, asymptotic_product_prob

logger = logging.getLogger(__name__)

REPORT_FORMAT_VERSION = "1.0"

BOUND_CHECK_COLUMNS = (
    "eps",
    "n",
    "m",
    "spec_hash",
    "trials",
    "hits",
    "p_hat",
    "ci_low",
    "ci_high",
    "bound",
    "verdict",
)


def format_value(value: Any) -> str:
    """CSV text of one cell: floats with 17 significant digits, None as empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def render_csv(rows: Iterable[Mapping[str, Any]], columns: Sequence[str]) -> str:
    """CSV text with a header row and '\\n' line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(column)) for column in columns])
    return buffer.getvalue()


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, Mapping):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def render_json(document: Mapping[str, Any]) -> str:
    """Sorted, indented JSON text with a trailing newline."""
    return json.dumps(_json_safe(document), indent=2, sort_keys=True) + "\n"


def write_text(path: Union[str, Path], text: str) -> Path:
    """
    Write text to path, creating parent directories.

    Raises:
        OSError: If the file cannot be written (message includes the path)
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        logger.error(f"Failed to write {path}: {e}")
        raise OSError(f"{path}: {e.strerror or e}") from e
    logger.info(f"Wrote {path}")
    return path


def render_report(
    rows: Sequence[Mapping[str, Any]],
    columns: Sequence[str],
    fmt: str,
    metadata: Optional[Mapping[str, Any]] = None,
) -> str:
    """
    Render report rows as CSV or as a JSON document.

    The JSON form is {"format_version", "metadata", "rows"} with rows limited
    to the given columns.
    """
    if fmt == "csv":
        return render_csv(rows, columns)
    if fmt == "json":
        document: Dict[str, Any] = {
            "format_version": REPORT_FORMAT_VERSION,
            "metadata": dict(metadata or {}),
            "rows": [{column: row.get(column) for column in columns} for row in rows],
        }
        return render_json(document)
    raise UsageError(f"Unknown report format '{fmt}'")


def product_law_rows(
    table: ProductLawTable, with_asymptotic: bool = False
) -> List[Dict[str, Any]]:
    """Rows t, cdf and, on request, the small-eps asymptotic and exact/asymptotic ratio."""
    rows = []
    for t, cdf in zip(table.grid.tolist(), table.cdf.tolist()):
        row: Dict[str, Any] = {"t": t, "cdf": cdf}
        if with_asymptotic:
            asymptotic = asymptotic_product_prob(table.n, math.exp(t)) if t < 0 else None
            row["asymptotic"] = asymptotic
            row["ratio"] = cdf / asymptotic if asymptotic else None
        rows.append(row)
    return rows


def product_law_columns(with_asymptotic: bool = False) -> List[str]:
    return ["t", "cdf", "asymptotic", "ratio"] if with_asymptotic else ["t", "cdf"]


def sidecar_path(csv_path: Union[str, Path]) -> Path:
    path = Path(csv_path)
    return path.with_name(path.stem + ".json")


def export_product_law(
    table: ProductLawTable,
    csv_path: Union[str, Path],
    with_asymptotic: bool = False,
) -> Path:
    """
    Write a product-law table as CSV plus a JSON sidecar.

    The sidecar sits next to the CSV with the same stem and holds the grid
    bounds, step, truncation bounds and error estimate.

    Returns:
        Path of the sidecar
    """
    csv_path = Path(csv_path)
    columns = product_law_columns(with_asymptotic)
    write_text(csv_path, render_csv(product_law_rows(table, with_asymptotic), columns))

    metadata = dict(table.metadata())
    metadata["format_version"] = REPORT_FORMAT_VERSION
    metadata["columns"] = columns
    sidecar = sidecar_path(csv_path)
    if sidecar == csv_path:
        sidecar = csv_path.with_name(csv_path.name + ".meta.json")
    write_text(sidecar, render_json(metadata))
    return sidecar
