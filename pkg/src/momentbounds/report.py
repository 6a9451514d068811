"""Verification reports and their CSV / JSON-lines serialisation."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import IO, Iterable

__all__ = ["HEADER", "STATUSES", "Row", "Report", "format_float", "emit", "render"]

HEADER = ("check_id", "theorem", "q", "lhs", "rhs", "margin", "status", "method", "ci_halfwidth")
# inapplicable: the scenario violates a hypothesis; unavailable: exact enumeration refused
STATUSES = ("pass", "fail", "not_asserted", "inapplicable", "unavailable")


def format_float(x: float | None) -> str:
    """17 significant digits; empty for missing values."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


@dataclass(frozen=True)
class Row:
    check_id: str
    theorem: str
    q: float | None
    lhs: float
    rhs: float
    margin: float
    status: str
    method: str
    ci_halfwidth: float = 0.0

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    def fields(self) -> list[str]:
        return [self.check_id, self.theorem, format_float(self.q), format_float(self.lhs),
                format_float(self.rhs), format_float(self.margin), self.status, self.method,
                format_float(self.ci_halfwidth)]


@dataclass
class Report:
    rows: list[Row]

    @property
    def failed(self) -> bool:
        return any(r.status == "fail" for r in self.rows)

    def counts(self) -> dict[str, int]:
        out = {s: 0 for s in STATUSES}
        for r in self.rows:
            out[r.status] += 1
        return out

    def by_status(self, status: str) -> list[Row]:
        return [r for r in self.rows if r.status == status]


def _csv_line(values: Iterable[str]) -> str:
    out = []
    for v in values:
        if any(ch in v for ch in ',"\n'):
            v = '"' + v.replace('"', '""') + '"'
        out.append(v)
    return ",".join(out) + "\n"


def emit(report: Report, fmt: str, dest: IO[str]) -> None:
    """Write ``report`` as ``csv`` or ``jsonl``; output depends only on the rows."""
    if fmt == "csv":
        dest.write(_csv_line(HEADER))
        for r in report.rows:
            dest.write(_csv_line(r.fields()))
    elif fmt == "jsonl":
        for r in report.rows:
            dest.write(json.dumps(dict(zip(HEADER, r.fields()))) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}; use csv or jsonl")


def render(report: Report, fmt: str = "csv") -> str:
    buf = io.StringIO()
    emit(report, fmt, buf)
    return buf.getvalue()
