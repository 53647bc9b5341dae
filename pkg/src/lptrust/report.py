"""Result rows and their CSV / markdown rendering."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields

COLUMNS = ("alg", "F", "iter", "eps_K", "dF", "h_K", "h_K_nc", "sparsity",
           "feval", "hess", "prox_lp", "time_s")
_INT_COLUMNS = {"iter", "feval", "hess", "prox_lp"}
_OPTIONAL = {"h_K", "h_K_nc"}


@dataclass(frozen=True)
class ReportRow:
    alg: str
    F: float
    iter: int
    eps_K: float
    dF: float
    h_K: float | None
    h_K_nc: float | None
    sparsity: float
    feval: int
    hess: int
    prox_lp: int
    time_s: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "alg":
                continue
            if v is None:
                if f.name not in _OPTIONAL:
                    raise ValueError(f"{f.name} may not be blank")
                continue
            if f.name in _INT_COLUMNS:
                if int(v) != v or v < 0:
                    raise ValueError(f"{f.name} must be a nonnegative integer")
            elif not math.isfinite(v):
                raise ValueError(f"{f.name} must be finite")

    def same_except_time(self, other: "ReportRow") -> bool:
        a, b = asdict(self), asdict(other)
        a.pop("time_s")
        b.pop("time_s")
        return a == b


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def emit_report(rows: list[ReportRow], fmt: str = "csv") -> str:
    if not rows:
        raise ValueError("nothing to report")
    table = [[_fmt(getattr(r, c)) for c in COLUMNS] for r in rows]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        w.writerows(table)
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(COLUMNS) + " |",
                 "|" + "|".join("---" for _ in COLUMNS) + "|"]
        lines += ["| " + " | ".join(cell or "-" for cell in row) + " |" for row in table]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def parse_report(text: str) -> list[ReportRow]:
    """Inverse of ``emit_report(rows, "csv")``."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != COLUMNS:
        raise ValueError("unexpected CSV header")
    rows = []
    for rec in reader:
        vals = {}
        for name, cell in zip(COLUMNS, rec):
            if name == "alg":
                vals[name] = cell
            elif cell == "":
                vals[name] = None
            elif name in _INT_COLUMNS:
                vals[name] = int(cell)
            else:
                vals[name] = float(cell)
        rows.append(ReportRow(**vals))
    return rows
