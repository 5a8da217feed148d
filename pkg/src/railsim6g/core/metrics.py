"""Column-oriented metric tables and their CSV/JSON persistence."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping


class MetricsError(ValueError):
    """A table violates its invariants (ragged columns, non-finite values)."""


def _fmt(x: float) -> str:
    # repr() is the shortest string that round-trips a double exactly
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return repr(float(x))


@dataclass
class MetricsTable:
    columns: dict[str, list[float]] = field(default_factory=dict)
    metadata: dict[str, object] = field(default_factory=dict)

    @classmethod
    def from_rows(cls, rows: Iterable[Mapping[str, float]],
                  columns: list[str] | None = None,
                  metadata: Mapping[str, object] | None = None) -> "MetricsTable":
        rows = list(rows)
        if columns is None:
            columns = list(rows[0]) if rows else []
        table = cls({c: [] for c in columns}, dict(metadata or {}))
        for row in rows:
            table.add_row(row)
        return table

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def add_row(self, row: Mapping[str, float]) -> None:
        missing = set(self.columns) - set(row)
        extra = set(row) - set(self.columns)
        if missing or extra:
            raise MetricsError(f"row columns mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, col in self.columns.items():
            col.append(row[name])

    def rows(self) -> list[dict[str, float]]:
        names = list(self.columns)
        return [dict(zip(names, vals)) for vals in zip(*self.columns.values())]

    def column(self, name: str) -> list[float]:
        return self.columns[name]

    def validate(self) -> None:
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise MetricsError(f"ragged table: column lengths {sorted(lengths)}")
        for name, col in self.columns.items():
            for i, v in enumerate(col):
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise MetricsError(f"column {name!r} row {i}: {v!r} is not a number")
                if not math.isfinite(v):
                    raise MetricsError(f"column {name!r} row {i}: non-finite value {v!r}")

    def to_csv(self) -> str:
        self.validate()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(self.columns))
        for vals in zip(*self.columns.values()):
            w.writerow([_fmt(v) for v in vals])
        return buf.getvalue()

    def to_json(self) -> str:
        self.validate()
        return json.dumps({"columns": self.columns, "metadata": self.metadata},
                          indent=2, sort_keys=False) + "\n"


def write_table(table: MetricsTable, path: str | Path, format: str = "csv") -> Path:
    """Persist ``table`` as CSV (header + one line per row) or JSON.

    Refuses tables holding NaN/inf or non-numeric cells.
    """
    if format not in ("csv", "json"):
        raise ValueError(f"unknown table format {format!r}")
    text = table.to_csv() if format == "csv" else table.to_json()
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _number(s: str) -> float:
    try:
        return int(s)
    except ValueError:
        return float(s)


def read_table(path: str | Path) -> MetricsTable:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        data = json.loads(text)
        return MetricsTable({k: list(v) for k, v in data["columns"].items()},
                            dict(data.get("metadata", {})))
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    table = MetricsTable({c: [] for c in header})
    for rec in reader:
        table.add_row({c: _number(v) for c, v in zip(header, rec)})
    return table
