"""Output helpers: atomic file writes, CSV tables and small SVG bar charts."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from html import escape
from pathlib import Path
from typing import Iterable, Sequence


def write_atomic(path: str | Path, text: str) -> Path:
    """Write ``text`` to a temp file beside ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def dumps_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def bar_chart_svg(labels: Sequence[str], values: Sequence[float], title: str) -> str:
    """Horizontal bar chart; negative values extend left of the zero line."""
    row_h, label_w, bar_w, pad = 22, 320, 360, 10
    height = pad * 2 + 30 + row_h * len(labels)
    width = label_w + bar_w + 90
    lo = min([0.0, *values])
    hi = max([0.0, *values])
    span = (hi - lo) or 1.0
    x0 = label_w + (0.0 - lo) / span * bar_w
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="12">',
        f'<text x="{pad}" y="{pad + 14}" font-size="14" font-weight="bold">{escape(title)}</text>',
    ]
    for k, (label, value) in enumerate(zip(labels, values)):
        y = pad + 30 + k * row_h
        w = abs(value) / span * bar_w
        x = x0 if value >= 0 else x0 - w
        parts.append(f'<text x="{label_w - 6}" y="{y + 14}" text-anchor="end">{escape(label)}</text>')
        parts.append(
            f'<rect x="{x:.2f}" y="{y + 3}" width="{w:.2f}" height="{row_h - 6}" fill="#4C72B0"/>'
        )
        parts.append(f'<text x="{label_w + bar_w + 6}" y="{y + 14}">{value:.4g}</text>')
    parts.append(
        f'<line x1="{x0:.2f}" y1="{pad + 26}" x2="{x0:.2f}" y2="{height - pad}" stroke="#333"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
