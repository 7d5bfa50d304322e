"""Static SVG charts: log-log normalization scatter and grouped metric bars."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 560, 440
MARGIN = dict(left=80, right=20, top=40, bottom=60)
COLORS = ("#888888", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


class PlotError(ValueError):
    pass


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    ids: Sequence[str] = ()


def mean_abs_log_ratio(pred, target) -> float:
    """Mean |log10(pred / target)|; 0 when every point sits on the identity line."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    ok = (pred > 0) & (target > 0)
    if not ok.any():
        raise PlotError("no positive (prediction, target) pairs")
    return float(np.abs(np.log10(pred[ok] / target[ok])).mean())


def _log_ticks(lo: float, hi: float) -> list[float]:
    return [10.0 ** e for e in range(math.floor(lo), math.ceil(hi) + 1)]


def _fmt_tick(v: float) -> str:
    return f"{v:g}"


def scatter_svg(series: Sequence[Series], xlabel: str, ylabel: str, title: str = "") -> str:
    """Log-log scatter with the dashed identity ("optimum") line across the full range."""
    pts = [(x, y) for s in series for x, y in zip(s.x, s.y) if x > 0 and y > 0]
    if not pts:
        raise PlotError("nothing to plot: no positive points")
    logs = np.log10(np.array(pts))
    lo = math.floor(logs.min() * 10) / 10 - 0.1
    hi = math.ceil(logs.max() * 10) / 10 + 0.1
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]

    def sx(v):
        return x0 + (math.log10(v) - lo) / (hi - lo) * (x1 - x0)

    def sy(v):
        return y0 - (math.log10(v) - lo) / (hi - lo) * (y0 - y1)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
           f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" fill="none" stroke="black"/>']
    for t in _log_ticks(lo, hi):
        if lo <= math.log10(t) <= hi:
            out.append(f'<line x1="{sx(t):.2f}" y1="{y0}" x2="{sx(t):.2f}" y2="{y0 + 5}" stroke="black"/>'
                       f'<text x="{sx(t):.2f}" y="{y0 + 18}" text-anchor="middle">{_fmt_tick(t)}</text>')
            out.append(f'<line x1="{x0 - 5}" y1="{sy(t):.2f}" x2="{x0}" y2="{sy(t):.2f}" stroke="black"/>'
                       f'<text x="{x0 - 8}" y="{sy(t) + 4:.2f}" text-anchor="end">{_fmt_tick(t)}</text>')
    out.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{(y0 + y1) / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {(y0 + y1) / 2})">{escape(ylabel)}</text>')
    e_lo, e_hi = 10.0 ** lo, 10.0 ** hi
    out.append(f'<line class="identity" x1="{sx(e_lo):.2f}" y1="{sy(e_lo):.2f}" x2="{sx(e_hi):.2f}" '
               f'y2="{sy(e_hi):.2f}" stroke="black" stroke-dasharray="6,4"/>')
    for i, s in enumerate(series):
        color = COLORS[i % len(COLORS)]
        for x, y in zip(s.x, s.y):
            if x > 0 and y > 0:
                out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}" fill-opacity="0.8"/>')
        ly = y1 + 15 + 15 * i
        out.append(f'<circle cx="{x0 + 12}" cy="{ly - 4}" r="4" fill="{color}"/>'
                   f'<text x="{x0 + 22}" y="{ly}">{escape(s.label)}</text>')
    ly = y1 + 15 + 15 * len(series)
    out.append(f'<line x1="{x0 + 6}" y1="{ly - 4}" x2="{x0 + 18}" y2="{ly - 4}" stroke="black" '
               f'stroke-dasharray="3,2"/><text x="{x0 + 22}" y="{ly}">optimum (identity)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scatter_csv(series: Sequence[Series], xname: str = "target_kwh", yname: str = "plotted_kwh") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["series", "model_id", xname, yname])
    for s in series:
        ids = list(s.ids) or [""] * len(s.x)
        for mid, x, y in zip(ids, s.x, s.y):
            w.writerow([s.label, mid, repr(float(x)), repr(float(y))])
    return buf.getvalue()


def bar_svg(groups: Sequence[str], metrics: dict[str, Sequence[Optional[float]]],
            errors: Optional[dict[str, Sequence[Optional[float]]]] = None, title: str = "") -> str:
    """One panel per metric, one bar per group; missing values are left as gaps."""
    if not groups or not metrics:
        raise PlotError("nothing to plot: no groups or metrics")
    errors = errors or {}
    panel_w = WIDTH / len(metrics)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>']
    y_top, y_bot = MARGIN["top"] + 10, HEIGHT - MARGIN["bottom"]
    for p, (name, values) in enumerate(metrics.items()):
        vals = [v for v in values if v is not None and math.isfinite(v)]
        errs = errors.get(name, [None] * len(values))
        hi = max([0.0] + [v + (e or 0) for v, e in zip(values, errs) if v is not None and math.isfinite(v)])
        lo = min([0.0] + vals)
        span = (hi - lo) or 1.0
        px0 = p * panel_w + 50
        px1 = (p + 1) * panel_w - 10

        def sy(v):
            return y_bot - (v - lo) / span * (y_bot - y_top)

        out.append(f'<g class="panel" data-metric="{escape(name)}">')
        out.append(f'<line x1="{px0}" y1="{y_top}" x2="{px0}" y2="{y_bot}" stroke="black"/>')
        out.append(f'<line x1="{px0}" y1="{sy(0):.2f}" x2="{px1}" y2="{sy(0):.2f}" stroke="black"/>')
        for t in (lo, hi):
            out.append(f'<text x="{px0 - 4}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:.3g}</text>')
        out.append(f'<text x="{(px0 + px1) / 2}" y="{y_top - 8}" text-anchor="middle">{escape(name)}</text>')
        slot = (px1 - px0) / len(groups)
        for g, (label, v) in enumerate(zip(groups, values)):
            cx = px0 + slot * (g + 0.5)
            out.append(f'<text x="{cx:.2f}" y="{y_bot + 14}" text-anchor="middle" font-size="9">'
                       f'{escape(str(label))}</text>')
            if v is None or not math.isfinite(v):
                continue
            top, bottom = sorted((sy(v), sy(0)))
            out.append(f'<rect class="bar" x="{cx - slot * 0.35:.2f}" y="{top:.2f}" width="{slot * 0.7:.2f}" '
                       f'height="{bottom - top:.2f}" fill="{COLORS[1 + p % (len(COLORS) - 1)]}"/>')
            e = errs[g] if g < len(errs) else None
            if e:
                out.append(f'<line x1="{cx:.2f}" y1="{sy(v - e):.2f}" x2="{cx:.2f}" y2="{sy(v + e):.2f}" '
                           f'stroke="black"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_csv(groups: Sequence[str], metrics: dict[str, Sequence[Optional[float]]],
            errors: Optional[dict[str, Sequence[Optional[float]]]] = None) -> str:
    errors = errors or {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["group", "metric", "value", "std"])
    for name, values in metrics.items():
        errs = errors.get(name, [None] * len(values))
        for g, v, e in zip(groups, values, errs):
            w.writerow([g, name, "" if v is None else repr(float(v)), "" if e is None else repr(float(e))])
    return buf.getvalue()
