"""File writers: path CSV and a small self-contained log-log SVG."""

from __future__ import annotations

import csv
import io
import math

import numpy as np


def path_csv(times, values, label: str, n: int, seed, path: int = 0) -> str:
    """CSV with a '#'-prefixed metadata row, then columns t, X1..Xd."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise ValueError("expected a single path of shape (N+1, d)")
    buf = io.StringIO()
    buf.write(f"# model={label},n={n},seed={seed},path={path}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", *(f"X{i + 1}" for i in range(values.shape[1]))])
    for t, row in zip(times, values):
        w.writerow([repr(float(t)), *(repr(float(v)) for v in row)])
    return buf.getvalue()


def read_path_csv(text: str):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return data[:, 0], data[:, 1:]


def loglog_svg(levels, medians, lower=None, upper=None, title: str = "", slope: float | None = None) -> str:
    """Median sup error against n on log-log axes, optional quartile bars."""
    W, H, pad = 480, 360, 56
    xs = np.log10(np.asarray(levels, dtype=float))
    ys_all = [v for v in [*medians, *(lower or []), *(upper or [])] if v > 0]
    if not ys_all:
        ys_all = [1.0]
    ylo, yhi = math.log10(min(ys_all)), math.log10(max(ys_all))
    if yhi - ylo < 1e-9:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    xlo, xhi = xs.min(), xs.max() if xs.max() > xs.min() else xs.min() + 1

    def px(x):
        return pad + (x - xlo) / (xhi - xlo) * (W - 2 * pad)

    def py(v):
        y = math.log10(v) if v > 0 else ylo
        return H - pad - (y - ylo) / (yhi - ylo) * (H - 2 * pad)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}" stroke="black"/>',
        f'<text x="{W / 2:.1f}" y="{H - 16}" text-anchor="middle" font-size="12">n (log scale)</text>',
        f'<text x="16" y="{H / 2:.1f}" font-size="12" transform="rotate(-90 16 {H / 2:.1f})" '
        'text-anchor="middle">median sup error (log scale)</text>',
    ]
    if title:
        out.append(f'<text x="{W / 2:.1f}" y="24" text-anchor="middle" font-size="14">{title}</text>')
    for n, x in zip(levels, xs):
        out.append(f'<text x="{px(x):.1f}" y="{H - pad + 16}" text-anchor="middle" font-size="10">{n}</text>')
    if lower is not None and upper is not None:
        for x, lo, hi in zip(xs, lower, upper):
            out.append(f'<line x1="{px(x):.1f}" y1="{py(lo):.1f}" x2="{px(x):.1f}" y2="{py(hi):.1f}" stroke="gray"/>')
    pts = " ".join(f"{px(x):.1f},{py(v):.1f}" for x, v in zip(xs, medians))
    out.append(f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>')
    for x, v in zip(xs, medians):
        out.append(f'<circle cx="{px(x):.1f}" cy="{py(v):.1f}" r="3" fill="steelblue"/>')
    if slope is not None:
        out.append(f'<text x="{W - pad}" y="{pad}" text-anchor="end" font-size="12">fitted rate {slope:.3f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
