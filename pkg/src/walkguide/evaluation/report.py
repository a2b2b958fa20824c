"""Score tables in aligned-text and CSV form."""

from __future__ import annotations

import csv
import io
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable

from .judge import CATEGORIES, EvalReport

HEADER = ["Backend", "Dest", "Left", "Right", "Path", "Reco", "Avg", "# Words", "Inf. Time",
          "Acc.", "ROUGE-L", "METEOR", "Emb-F1", "N", "Missing"]


def fmt2(v: float | None) -> str:
    """Two decimals, halves rounded away from zero (3.725 -> 3.73)."""
    if v is None:
        return "-"
    q = Decimal(repr(float(v))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return str(q.copy_abs() if q.is_zero() else q)


def _values(r: EvalReport) -> list[float | None]:
    m = r.metric_means
    return [*(r.category_means.get(c) for c in CATEGORIES), r.average, r.words_mean,
            r.inference_time_s, r.go_stop_accuracy, m.get("rouge_l"), m.get("meteor_lite"),
            m.get("embedding_f1")]


def report_row(r: EvalReport) -> list[str]:
    return [r.backend_id, *(fmt2(v) for v in _values(r)), str(r.n_scenes), str(r.missing)]


def delta_row(a: EvalReport, b: EvalReport, label: str = "delta") -> list[str]:
    """``b - a`` per numeric column, from unrounded values."""
    cells = [fmt2(y - x) if x is not None and y is not None else "-"
             for x, y in zip(_values(a), _values(b))]
    return [label, *cells, str(b.n_scenes - a.n_scenes), str(b.missing - a.missing)]


def _columns(rows: list[list[str]]) -> list[int]:
    """Drop the embedding column when no row has it."""
    keep = list(range(len(HEADER)))
    emb = HEADER.index("Emb-F1")
    if all(r[emb] == "-" for r in rows):
        keep.remove(emb)
    return keep


def render_rows(rows: list[list[str]], fmt: str = "table", footer: str | None = None) -> str:
    keep = _columns(rows)
    table = [[HEADER[i] for i in keep]] + [[r[i] for i in keep] for r in rows]
    if fmt in ("csv", "delimited"):
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(table)
        return buf.getvalue()
    if fmt != "table":
        raise ValueError(f"unknown report format {fmt!r}")
    widths = [max(len(row[i]) for row in table) for i in range(len(keep))]
    lines = []
    for n, row in enumerate(table):
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if n == 0:
            lines.append("-" * len(lines[0]))
    if footer:
        lines.append(footer)
    return "\n".join(lines) + "\n"


def render_report(reports: EvalReport | Iterable[EvalReport], fmt: str = "table") -> str:
    """Rows sorted by backend id; the table form ends with a count line."""
    reports = [reports] if isinstance(reports, EvalReport) else list(reports)
    reports.sort(key=lambda r: r.backend_id)
    footer = (f"scenes={sum(r.n_scenes for r in reports)} judged={sum(r.judged for r in reports)} "
              f"present={sum(r.present for r in reports)} missing={sum(r.missing for r in reports)}")
    return render_rows([report_row(r) for r in reports], fmt, footer if fmt == "table" else None)


def render_comparison(a: EvalReport, b: EvalReport, fmt: str = "table") -> str:
    """Both arms in the given order, then a ``delta`` row (second minus first)."""
    return render_rows([report_row(a), report_row(b), delta_row(a, b)], fmt)
