"""CSV, Markdown and SVG bar-chart renderings of a result table."""
from __future__ import annotations

import csv
import io
from typing import Optional
from xml.sax.saxutils import escape

from .errors import ConfigError, EmptyTable
from .experiments import ResultRow, ResultTable

COLUMNS = ("Layers", "TrainAlgorithm", "ActivationFunction", "Accuracy", "RMSE", "Sensitivity",
           "Specificity", "Precision", "MCC", "F1-score", "AUC")
_METRIC_OF = {"Accuracy": "accuracy", "Sensitivity": "sensitivity", "Specificity": "specificity",
              "Precision": "precision", "MCC": "mcc", "F1-score": "f1", "AUC": "auc"}
FORMATS = ("csv", "markdown", "svg-bar")
MISSING = "NA"


def _num(v: Optional[float]) -> str:
    return MISSING if v is None else f"{v:.6f}"


def layers_label(row: ResultRow) -> str:
    return "[" + ", ".join(str(w) for w in row.architecture) + "]" if row.architecture else "-"


def row_cells(row: ResultRow) -> list[str]:
    """Table cells for one row; RMSE is the error rate, 1 - accuracy."""
    cells = [layers_label(row), row.optimizer, row.activation]
    m = row.mean
    for col in COLUMNS[3:]:
        if m is None:
            cells.append(MISSING)
        elif col == "RMSE":
            cells.append(_num(1.0 - m.accuracy))
        else:
            cells.append(_num(getattr(m, _METRIC_OF[col])))
    return cells


def to_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in table.rows:
        w.writerow(row_cells(row))
    return buf.getvalue()


def to_markdown(table: ResultTable) -> str:
    lines = ["| " + " | ".join(COLUMNS) + " |",
             "|" + "|".join("---" if i < 3 else "---:" for i in range(len(COLUMNS))) + "|"]
    lines += ["| " + " | ".join(row_cells(r)) + " |" for r in table.rows]
    return "\n".join(lines) + "\n"


def to_svg(table: ResultTable, bar_width: int = 14, height: int = 240) -> str:
    """Paired accuracy/F1 bars per row, one ``<g class="row">`` group each."""
    colors = {"Accuracy": "#4472c4", "F1-score": "#ed7d31"}
    left, top, bottom = 50, 40, 110
    group = 2 * bar_width + 16
    width = left + group * len(table.rows) + 20
    total_h = top + height + bottom
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{total_h}" '
           f'viewBox="0 0 {width} {total_h}">',
           f'<line x1="{left}" y1="{top + height}" x2="{width - 10}" y2="{top + height}" stroke="black"/>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + height}" stroke="black"/>']
    for tick in range(0, 11, 2):
        y = top + height - height * tick / 10
        out.append(f'<text x="{left - 6}" y="{y + 4:.1f}" font-size="10" text-anchor="end">{tick / 10:.1f}</text>')
    for n, row in enumerate(table.rows):
        x0 = left + 8 + n * group
        out.append('<g class="row">')
        for k, col in enumerate(("Accuracy", "F1-score")):
            v = None if row.mean is None else getattr(row.mean, _METRIC_OF[col])
            h = 0.0 if v is None else max(0.0, min(1.0, v)) * height
            out.append(f'<rect x="{x0 + k * bar_width}" y="{top + height - h:.3f}" width="{bar_width}" '
                       f'height="{h:.3f}" fill="{colors[col]}"><title>{escape(col)}: {_num(v)}</title></rect>')
        label = escape(f"{layers_label(row)} {row.optimizer} {row.activation}".strip())
        lx, ly = x0 + bar_width, top + height + 8
        out.append(f'<text x="{lx}" y="{ly}" font-size="9" transform="rotate(60 {lx} {ly})">{label}</text>')
        out.append("</g>")
    out.append('<g class="legend">')
    for k, (name, color) in enumerate(colors.items()):
        x = left + 10 + k * 100
        out.append(f'<rect x="{x}" y="12" width="12" height="12" fill="{color}"/>')
        out.append(f'<text x="{x + 16}" y="22" font-size="11">{escape(name)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


_RENDERERS = {"csv": to_csv, "markdown": to_markdown, "svg-bar": to_svg}


def render(table: ResultTable, fmt: str) -> str:
    if fmt not in _RENDERERS:
        raise ConfigError(f"unknown report format {fmt!r}; choose from {', '.join(FORMATS)}")
    if not table.rows:
        raise EmptyTable("nothing to report")
    return _RENDERERS[fmt](table)


def emit_report(table: ResultTable, fmt: str, path=None) -> str:
    """Render ``table``; write it to ``path`` too when given. Returns the text."""
    text = render(table, fmt)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text
