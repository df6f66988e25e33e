"""Result rows and their CSV serialization."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

CSV_COLUMNS = (
    "experiment", "model", "regime", "source", "d", "N", "rho", "seed",
    "steps", "samples", "risk", "risk_normalized", "config_hash",
)

DIAG_COLUMNS = ("model", "regime", "rho", "source", "risk_normalized",
                "theory_normalized", "abs_difference", "config_hash")


@dataclass(frozen=True)
class RiskRecord:
    experiment: str
    model: str
    regime: str
    source: str      # "theory" | "oracle" | "sgd"
    d: int
    N: int
    rho: float
    seed: int
    steps: int
    samples: int
    risk: float
    risk_normalized: float
    config_hash: str

    def __post_init__(self):
        if self.risk < 0 and self.risk == self.risk:  # NaN-safe
            raise ValueError(f"risk must be nonnegative, got {self.risk}")

    def row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


def sort_records(records: list[RiskRecord]) -> list[RiskRecord]:
    return sorted(records, key=lambda r: (r.regime, r.rho, r.seed, r.source, r.steps))


def _format(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def records_to_csv(records: list[RiskRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow([_format(v) for v in rec.row()])
    return buf.getvalue()


def write_records(path: str, records: list[RiskRecord]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(records))


def write_diagnostics(path: str, rows: list[dict]) -> None:
    """Companion file pairing each oracle/sgd row with its theory value."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DIAG_COLUMNS)
        for row in rows:
            writer.writerow([_format(row[c]) for c in DIAG_COLUMNS])
