"""CSV and JSON emission for experiment results.

Report contents are byte-stable for identical inputs: rows arrive in
deterministic order, floats are rendered with repr, and no timestamps are
embedded. Only the file *names* carry a timestamp.
"""

from __future__ import annotations

import csv
import io
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

SCHEMA_VERSION = 1

EXPERIMENT_COLUMNS: dict[str, tuple[str, ...]] = {
    "pq1": ("kind", "mean_proportion", "review_count"),
    "pq2": ("kind", "order", "bits_per_token", "token_count"),
    "rq1": ("extension", "side", "order", "bits_per_token", "token_count"),
    "rq2": ("extension", "decision", "order", "bits_per_token", "token_count"),
    "table3": ("extension", "side", "token_class", "percent", "token_count"),
    "table4": ("extension", "side", "token_class", "rank", "token", "percent", "stability"),
}

FORMATS = ("csv", "json", "both")


def _render(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else str(value)


def render_csv(experiment: str, rows: Sequence[Mapping]) -> str:
    columns = EXPERIMENT_COLUMNS[experiment]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_render(row.get(col)) for col in columns])
    return buffer.getvalue()


def render_json(experiment: str, rows: Sequence[Mapping], extra: Mapping | None = None) -> str:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "experiment": experiment,
        "results": [dict(row) for row in rows],
    }
    if extra:
        payload.update(extra)
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def report_timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%f")


def write_reports(
    experiment: str,
    rows: Sequence[Mapping],
    out_dir: str | Path,
    fmt: str = "both",
    extra: Mapping | None = None,
    timestamp: str | None = None,
) -> list[Path]:
    """Write `<experiment>_<timestamp>.{csv,json}`; returns the paths."""
    if experiment not in EXPERIMENT_COLUMNS:
        raise ValueError(f"unknown experiment {experiment!r}")
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stamp = timestamp or report_timestamp()
    written = []
    if fmt in ("csv", "both"):
        path = out_dir / f"{experiment}_{stamp}.csv"
        path.write_text(render_csv(experiment, rows), encoding="utf-8", newline="")
        written.append(path)
    if fmt in ("json", "both"):
        path = out_dir / f"{experiment}_{stamp}.json"
        path.write_text(render_json(experiment, rows, extra), encoding="utf-8", newline="")
        written.append(path)
    return written
