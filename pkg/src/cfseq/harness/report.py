"""Render results.csv / diversity.csv as metric-by-method tables."""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .config import ALL_METHODS

REQUIRED = ("policy.json", "failures.jsonl", "results.csv", "diversity.csv")
EMPTY = "—"

PROPERTY_ROWS = (
    ("generated_pct", "Generated counterfactuals (%)", "{:.1f}"),
    ("validity", "Validity (↑)", "{:.2f}"),
    ("proximity", "Proximity (↓)", "{:.2f}"),
    ("sparsity", "Sparsity (↓)", "{:.2f}"),
    ("stochastic_certainty", "Stochastic certainty (↑)", "{:.2f}"),
    ("recency", "Recency (↓)", "{:.2f}"),
)
DIVERSITY_ROWS = (
    ("coverage", "C (↑)", "{:.2f}"),
    ("action_diversity", "AD (↑)", "{:.2f}"),
    ("cf_property_diversity", "CPD (↑)", "{:.2f}"),
)


class ReportError(RuntimeError):
    """The run directory lacks artifacts needed for a report."""


def _read(path: Path) -> dict:
    with path.open(newline="") as fh:
        return {row["method"]: row for row in csv.DictReader(fh)}


def build_tables(results_dir) -> tuple:
    """Return ``(methods, property_rows, diversity_rows)`` with formatted cells."""
    root = Path(results_dir)
    missing = [name for name in REQUIRED if not (root / name).exists()]
    if missing:
        raise ReportError(f"incomplete run in {root}: missing {', '.join(missing)}")
    results = _read(root / "results.csv")
    diversity = _read(root / "diversity.csv")
    methods = [m for m in ALL_METHODS if m in results]

    def rows(layout, source):
        out = []
        for key, label, fmt in layout:
            raw = [source.get(m, {}).get(key, "") for m in methods]
            out.append((label, [EMPTY if r == "" else fmt.format(float(r)) for r in raw]))
        return out

    return methods, rows(PROPERTY_ROWS, results), rows(DIVERSITY_ROWS, diversity)


def report(results_dir, fmt: str = "markdown") -> str:
    methods, prop_rows, div_rows = build_tables(results_dir)
    if fmt == "markdown":
        return _markdown(methods, prop_rows, div_rows)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", *methods])
        for label, cells in prop_rows + div_rows:
            writer.writerow([label, *cells])
        return buf.getvalue()
    raise ReportError(f"unknown report format {fmt!r}")


def _markdown(methods, prop_rows, div_rows) -> str:
    def table(title, rows):
        lines = [f"## {title}", "", "| Metric | " + " | ".join(methods) + " |",
                 "|---|" + "---|" * len(methods)]
        lines += [f"| {label} | " + " | ".join(cells) + " |" for label, cells in rows]
        return lines

    if not methods:
        return "# Results\n\nNo failures were collected; nothing to report.\n"
    lines = ["# Results", ""] + table("Counterfactual properties", prop_rows) + [""]
    lines += table("Diversity", div_rows) + [""]
    return "\n".join(lines)
