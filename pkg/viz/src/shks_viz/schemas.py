"""Input validation against the simulator CLI's documented CSV schemas.

This package never recomputes a number the simulator produced: bounds,
slopes, and intervals are read from the files or their side-car reports.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass


class SchemaError(ValueError):
    """Input file does not match the documented schema; names the columns."""


TRAJECTORY_COLUMNS = ["t", "hs_norm", "w1inf_norm", "log_energy"]
SCAN_COLUMNS = ["value", "n_survived", "p_hat", "ci_low", "ci_high", "theory_bound"]
CONVERGENCE_DT_COLUMNS = ["dt", "strong_error"]
CONVERGENCE_N_COLUMNS = ["n", "error"]
GBM_COLUMNS = [
    "lambda",
    "rho",
    "t",
    "n_paths",
    "exponent",
    "empirical_moment",
    "stderr",
    "expected_moment",
]


@dataclass
class Table:
    path: str
    columns: list[str]
    rows: list[dict[str, str]]

    def floats(self, column: str) -> list[float]:
        return [float(row[column]) for row in self.rows]

    def optional_floats(self, column: str) -> list[float | None]:
        return [
            float(row[column]) if row[column] != "" else None for row in self.rows
        ]


def read_table(path: str, required: list[str]) -> Table:
    """Read a CSV and require the named columns, erroring on the missing ones."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            columns = reader.fieldnames or []
            rows = list(reader)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    missing = [c for c in required if c not in columns]
    if missing:
        raise SchemaError(
            f"{path}: missing required column(s) {', '.join(missing)} "
            f"(found: {', '.join(columns) or 'none'})"
        )
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return Table(path=path, columns=list(columns), rows=rows)


def sidecar_json(csv_path: str, name: str) -> dict | None:
    """Load a JSON side-car living next to the CSV, if present."""
    candidate = os.path.join(os.path.dirname(os.path.abspath(csv_path)), name)
    if not os.path.exists(candidate):
        return None
    with open(candidate, "r", encoding="utf-8") as fh:
        return json.load(fh)


def trajectory_meta(csv_path: str) -> dict | None:
    base = os.path.basename(csv_path)
    stem = base[:-4] if base.endswith(".csv") else base
    return sidecar_json(csv_path, f"{stem}.meta.json")
