"""SVG summary charts written by hand (no plotting dependency).

One panel per (estimator, sampler) pair: mean exact risk against n on a log
axis, a min/max band across replicates, and dashed reference lines at the
Bayes risk and at 1 - eta (the counterexample's limit).  Reference lines
carry ``data-ref`` and ``data-value`` attributes so tests can read them.
"""
from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

from .harness import summarize

W, H = 560, 300
ML, MR, MT, MB = 60, 20, 36, 40


def _panels(records):
    """{(estimator, sampler): {"rows": [...], "bayes": value}} in first-seen order."""
    panels: dict = {}
    bayes: dict = {}
    for r in records:
        if r.failed:
            continue
        bayes.setdefault((r.estimator, r.sampler), r.bayes_risk)
    for run_id, est, smp, n, mean, lo, hi, cnt in summarize(records):
        panels.setdefault((est, smp), []).append((n, mean, lo, hi))
    out = {}
    for key, rows in panels.items():
        merged: dict = {}
        for n, mean, lo, hi in rows:  # several run ids: keep per-n envelope
            m = merged.setdefault(n, [[], math.inf, -math.inf])
            m[0].append(mean)
            m[1] = min(m[1], lo)
            m[2] = max(m[2], hi)
        rows = [(n, math.fsum(v[0]) / len(v[0]), v[1], v[2]) for n, v in sorted(merged.items())]
        out[key] = {"rows": rows, "bayes": bayes.get(key, math.nan)}
    return out


def _panel_svg(title, rows, bayes, y0):
    ns = [r[0] for r in rows]
    lx0, lx1 = math.log10(min(ns)), math.log10(max(ns))
    if lx1 == lx0:
        lx0, lx1 = lx0 - 0.5, lx1 + 0.5
    pw, ph = W - ML - MR, H - MT - MB

    def sx(n):
        return ML + (math.log10(n) - lx0) / (lx1 - lx0) * pw

    def sy(v):
        return y0 + MT + (1.0 - v) * ph

    parts = [f'<g class="panel" data-estimator="{escape(title[0])}" data-sampler="{escape(title[1])}">',
             f'<text x="{ML}" y="{y0 + 22}" font-size="14">{escape(title[0])} / {escape(title[1])}</text>',
             f'<rect x="{ML}" y="{y0 + MT}" width="{pw}" height="{ph}" fill="none" stroke="#999"/>']
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(f'<text x="{ML - 8}" y="{sy(t) + 4:.2f}" font-size="10" text-anchor="end">{t:g}</text>')
    for n in ns:
        parts.append(f'<text x="{sx(n):.2f}" y="{y0 + MT + ph + 14}" font-size="10" '
                     f'text-anchor="middle">{n}</text>')
    parts.append(f'<text x="{ML + pw / 2}" y="{y0 + H - 6}" font-size="11" text-anchor="middle">n</text>')
    band = [(sx(n), sy(hi)) for n, _, _, hi in rows] + [(sx(n), sy(lo)) for n, _, lo, _ in reversed(rows)]
    parts.append('<polygon class="band" fill="#4a7ab5" fill-opacity="0.2" stroke="none" points="'
                 + " ".join(f"{x:.2f},{y:.2f}" for x, y in band) + '"/>')
    parts.append('<polyline class="mean" fill="none" stroke="#1f4e8c" stroke-width="2" points="'
                 + " ".join(f"{sx(n):.2f},{sy(m):.2f}" for n, m, _, _ in rows) + '"/>')
    for n, m, _, _ in rows:
        parts.append(f'<circle cx="{sx(n):.2f}" cy="{sy(m):.2f}" r="3" fill="#1f4e8c" '
                     f'data-n="{n}" data-mean="{m:.17g}"/>')
    refs = []
    if not math.isnan(bayes):
        refs.append(("bayes", bayes, "#2a8f2a", "Bayes risk"))
        if bayes > 0:
            refs.append(("one-minus-eta", 1.0 - bayes, "#c0392b", "1 - eta"))
    for name, v, color, label in refs:
        parts.append(f'<line class="ref" data-ref="{name}" data-value="{v:.17g}" x1="{ML}" '
                     f'y1="{sy(v):.2f}" x2="{ML + pw}" y2="{sy(v):.2f}" stroke="{color}" '
                     f'stroke-dasharray="6,4"/>')
        parts.append(f'<text x="{ML + pw - 4}" y="{sy(v) - 4:.2f}" font-size="10" '
                     f'text-anchor="end" fill="{color}">{label}</text>')
    parts.append("</g>")
    return "\n".join(parts)


def svg_summary(records) -> str:
    panels = _panels(records)
    if not panels:
        raise ValueError("no successful records to plot")
    total_h = H * len(panels)
    body = [_panel_svg(key, p["rows"], p["bayes"], i * H) for i, (key, p) in enumerate(panels.items())]
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{total_h}" '
            f'viewBox="0 0 {W} {total_h}" font-family="sans-serif">\n'
            + "\n".join(body) + "\n</svg>\n")


def write_svg(records, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg_summary(records), encoding="utf-8")
    return path
