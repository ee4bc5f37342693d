"""Evasion report: canonical JSON, CSV cells, persisted outcome rows.

Everything written here is byte-deterministic for a fixed experiment
(sorted keys, no timestamps, relative paths only), so identically seeded
pipeline runs produce identical artifacts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..attacks import AttackOutcome
from .categories import CATEGORY_NAMES

REPORT_FORMAT_VERSION = 1
TOTAL_KEY = "total"

CSV_COLUMNS = ("run", "strategy", "category", "n", "evaded", "functional",
               "evaded_functional", "evasion_rate", "mean_queries",
               "max_queries_used", "aborted")


@dataclass(frozen=True)
class EvasionReport:
    data: dict

    @property
    def runs(self) -> dict:
        return self.data["runs"]

    def category_rates(self, label: str) -> dict[str, float | None]:
        cells = self.runs[label]["cells"]
        return {cat: cells[cat]["rate"] for cat in cells}

    def total_rate(self, label: str) -> float | None:
        return self.runs[label][TOTAL_KEY]["rate"]

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    def write_json(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_json(cls, path) -> "EvasionReport":
        return cls(data=json.loads(Path(path).read_text(encoding="utf-8")))

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for label in sorted(self.runs):
            run = self.runs[label]
            cells = run["cells"]
            ordered = [c for c in CATEGORY_NAMES if c in cells]
            ordered += [c for c in sorted(cells) if c not in CATEGORY_NAMES]
            for cat in ordered:
                lines.append(_csv_row(label, run, cat, cells[cat]))
            lines.append(_csv_row(label, run, "Total", run[TOTAL_KEY]))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def _csv_row(label: str, run: dict, category: str, cell: dict) -> str:
    rate = cell["rate"]
    return ",".join([
        label, run["strategy"], category, str(cell["n"]), str(cell["evaded"]),
        str(cell["functional"]), str(cell["evaded_functional"]),
        "" if rate is None else f"{rate:.6f}",
        f"{cell['mean_queries']:.4f}", str(cell["max_queries_used"]),
        str(cell["aborted"]),
    ])


def summarize_cell(outcomes: list[AttackOutcome], n: int) -> dict:
    """Aggregate one strategy x category cell from its outcome rows."""
    evaded = sum(1 for o in outcomes if o.evaded)
    functional = sum(1 for o in outcomes if o.functional)
    both = sum(1 for o in outcomes if o.evaded and o.functional)
    queries = [o.queries_used for o in outcomes]
    return {
        "n": n,
        "evaded": evaded,
        "functional": functional,
        "evaded_functional": both,
        "rate": (both / n) if n >= 1 else None,
        "mean_queries": (sum(queries) / len(queries)) if queries else 0.0,
        "max_queries_used": max(queries, default=0),
        "aborted": sum(1 for o in outcomes if o.aborted is not None),
    }


def write_outcomes_jsonl(path, rows: list[tuple[str, str, AttackOutcome]]) -> None:
    """Persist (run label, category, outcome) rows, one JSON object per line."""
    lines = []
    for run_label, category, outcome in rows:
        record = {"run": run_label, "category": category}
        record.update(outcome.to_dict())
        lines.append(json.dumps(record, sort_keys=True))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_outcomes_jsonl(path) -> list[tuple[str, str, AttackOutcome]]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        rows.append((record["run"], record["category"], AttackOutcome.from_dict(record)))
    return rows


def recount_from_outcomes(rows: list[tuple[str, str, AttackOutcome]]) -> dict:
    """Brute-force recount of every report cell from persisted rows.

    Every attacked sample contributes exactly one row per run, so cell
    populations equal row counts and each rate is |E n F| / n again.
    """
    grouped: dict[str, dict[str, list[AttackOutcome]]] = {}
    for run_label, category, outcome in rows:
        grouped.setdefault(run_label, {}).setdefault(category, []).append(outcome)
    result: dict = {}
    for run_label, cats in grouped.items():
        cells = {cat: summarize_cell(outs, len(outs)) for cat, outs in cats.items()}
        all_outcomes = [o for outs in cats.values() for o in outs]
        result[run_label] = {
            "cells": cells,
            TOTAL_KEY: summarize_cell(all_outcomes, len(all_outcomes)),
        }
    return result


def render_table(report: EvasionReport) -> str:
    """Plain-text layout: categories as rows, strategy runs as columns."""
    labels = sorted(report.runs)
    cats = [c for c in CATEGORY_NAMES
            if any(c in report.runs[lab]["cells"] for lab in labels)]
    width = max([len("category")] + [len(c) for c in cats] + [5])
    header = ["category".ljust(width)] + [lab.rjust(max(len(lab), 8)) for lab in labels]
    lines = ["  ".join(header)]
    def fmt(cell):
        return "-" if cell["rate"] is None else f"{100.0 * cell['rate']:.2f}%"
    for cat in cats:
        row = [cat.ljust(width)]
        for lab in labels:
            cell = report.runs[lab]["cells"].get(cat)
            text = "-" if cell is None else fmt(cell)
            row.append(text.rjust(max(len(lab), 8)))
        lines.append("  ".join(row))
    row = ["Total".ljust(width)]
    for lab in labels:
        row.append(fmt(report.runs[lab][TOTAL_KEY]).rjust(max(len(lab), 8)))
    lines.append("  ".join(row))
    return "\n".join(lines) + "\n"
