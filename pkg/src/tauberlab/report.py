"""Tabulated experiment output with pass flags, serialisable to CSV."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

__all__ = ["ValueReport", "format_value"]


def format_value(v: Any) -> str:
    """Render one cell. Floats use the shortest round-trip repr."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(float(v))
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        # numpy scalar
        return format_value(v.item())
    if isinstance(v, (tuple, list)):
        return " ".join(format_value(x) for x in v)
    return str(v)


@dataclass
class ValueReport:
    """Rows of (labels, numbers, pass flags) plus a metadata header.

    ``columns`` names every field; a column called ``pass`` (if present)
    holds the boolean verdict of each row.
    """

    name: str
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(
                f"{self.name}: row has {len(values)} fields, expected {len(self.columns)}"
            )
        self.rows.append(tuple(values))

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def where(self, **match) -> list[dict]:
        """Rows (as dicts) whose named fields equal the given values."""
        out = []
        for r in self.rows:
            d = dict(zip(self.columns, r))
            if all(d.get(k) == v for k, v in match.items()):
                out.append(d)
        return out

    @property
    def passed(self) -> bool:
        if "pass" not in self.columns:
            return True
        # blank cells come from merged sections that carry no verdict
        return all(bool(p) for p in self.column("pass") if not (isinstance(p, str) and p == ""))

    @property
    def failures(self) -> list[dict]:
        if "pass" not in self.columns:
            return []
        i = self.columns.index("pass")
        return [
            dict(zip(self.columns, r))
            for r in self.rows
            if not r[i] and not (isinstance(r[i], str) and r[i] == "")
        ]

    def extend(self, other: "ValueReport") -> None:
        """Append rows of a report with identical columns."""
        if other.columns != self.columns:
            raise ValueError("column mismatch")
        self.rows.extend(other.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# report: {self.name}\n")
        for k in sorted(self.meta):
            buf.write(f"# {k}: {format_value(self.meta[k])}\n")
        buf.write(",".join(self.columns) + "\n")
        for r in self.rows:
            buf.write(",".join(format_value(v) for v in r) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def __str__(self) -> str:
        return self.to_csv()


def merge_reports(name: str, reports: Sequence[ValueReport], meta=None) -> ValueReport:
    """Stack reports with differing columns under a common ``section`` label.

    Metadata of each part is kept under ``<part name>.<key>``.
    """
    cols: list[str] = ["section"]
    for rep in reports:
        for c in rep.columns:
            if c not in cols:
                cols.append(c)
    out = ValueReport(name, cols, meta=dict(meta or {}))
    for rep in reports:
        for k, v in rep.meta.items():
            out.meta[f"{rep.name}.{k}"] = v
    for rep in reports:
        for r in rep.rows:
            d = dict(zip(rep.columns, r))
            out.rows.append(tuple([rep.name] + [d.get(c, "") for c in cols[1:]]))
    return out
