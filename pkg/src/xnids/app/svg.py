"""Static SVG renderings of the explanation data products.

Text-only output keeps renders diffable and byte-deterministic. Colors
follow the usual convention: red pushes toward attack, blue toward
normal; the summary plot shades points by normalized feature value.
"""

from xml.sax.saxutils import escape

import numpy as np

RED = "#e8336d"
BLUE = "#3b7dd8"
GREY = "#666666"
ORANGE = "#e87d33"


def _fmt(v):
    return f"{v:.2f}"


def _svg(width, height, body):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        + body + "</svg>\n"
    )


def _text(x, y, s, size=11, anchor="start", color="#222222"):
    return (f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" '
            f'font-family="sans-serif" text-anchor="{anchor}" '
            f'fill="{color}">{escape(str(s))}</text>\n')


def _value_color(t):
    # blue (low) -> red (high)
    t = min(max(float(t), 0.0), 1.0)
    r = int(0x3B + t * (0xE8 - 0x3B))
    g = int(0x7D + t * (0x33 - 0x7D))
    b = int(0xD8 + t * (0x6D - 0xD8))
    return f"#{r:02x}{g:02x}{b:02x}"


def render_summary(summary, top=20):
    """Beeswarm-style summary: one row per feature, points at their phi."""
    if summary.phi_matrix.size == 0:
        raise ValueError("summary has no attributions to plot")
    order = summary.ranking[:top]
    rows = len(order)
    width, row_h, left = 760, 24, 240
    height = rows * row_h + 60
    span = float(np.abs(summary.phi_matrix[:, order]).max()) or 1.0
    mid_x = left + (width - left - 30) / 2
    scale = (width - left - 30) / 2 / span

    body = _text(mid_x, 20, "contribution toward attack probability",
                 anchor="middle", color=GREY)
    body += (f'<line x1="{mid_x:.1f}" y1="34" x2="{mid_x:.1f}" '
             f'y2="{height - 26}" stroke="#cccccc"/>\n')
    for r, fi in enumerate(order):
        cy = 46 + r * row_h
        body += _text(left - 8, cy + 4, summary.feature_names[fi], anchor="end")
        phis = summary.phi_matrix[:, fi]
        vals = summary.value_matrix[:, fi]
        vmin, vmax = float(vals.min()), float(vals.max())
        vspan = (vmax - vmin) or 1.0
        for k in range(phis.shape[0]):
            cx = mid_x + float(phis[k]) * scale
            jitter = ((k * 2654435761) % 17 - 8) * 0.8  # deterministic spread
            color = _value_color((float(vals[k]) - vmin) / vspan)
            body += (f'<circle cx="{cx:.1f}" cy="{cy + jitter:.1f}" r="2.4" '
                     f'fill="{color}" fill-opacity="0.75"/>\n')
    body += _text(width - 30, height - 8, "high value", anchor="end", color=RED)
    body += _text(left, height - 8, "low value", color=BLUE)
    return _svg(width, height, body)


def render_force(force, max_segments=12):
    """Opposing segment bars around the base value."""
    width, height = 760, 130
    base, out = force.base_value, force.model_output
    body = _text(20, 24, f"base {_fmt(base)}", color=GREY)
    body += _text(width - 20, 24, f"output {_fmt(out)}", anchor="end")

    lo = min(base, out) - 0.15
    hi = max(base, out) + 0.15
    scale = (width - 60) / (hi - lo)

    def x_at(v):
        return 30 + (v - lo) * scale

    y, h = 48, 26
    cursor = base
    for seg in force.positive[:max_segments]:
        x0, x1 = x_at(cursor), x_at(cursor + seg.phi)
        body += (f'<rect x="{min(x0, x1):.1f}" y="{y}" width="{abs(x1 - x0):.1f}" '
                 f'height="{h}" fill="{RED}" fill-opacity="0.85"/>\n')
        cursor += seg.phi
    for seg in force.negative[:max_segments]:
        x0, x1 = x_at(cursor), x_at(cursor + seg.phi)
        body += (f'<rect x="{min(x0, x1):.1f}" y="{y}" width="{abs(x1 - x0):.1f}" '
                 f'height="{h}" fill="{BLUE}" fill-opacity="0.85"/>\n')
        cursor += seg.phi
    body += (f'<line x1="{x_at(base):.1f}" y1="{y - 8}" x2="{x_at(base):.1f}" '
             f'y2="{y + h + 8}" stroke="{GREY}" stroke-dasharray="3,2"/>\n')
    body += (f'<line x1="{x_at(out):.1f}" y1="{y - 8}" x2="{x_at(out):.1f}" '
             f'y2="{y + h + 8}" stroke="#111111"/>\n')

    labels = [(s, RED) for s in force.positive[:3]] + [(s, BLUE) for s in force.negative[:3]]
    lx = 20
    for seg, color in labels:
        body += _text(lx, height - 12, f"{seg.feature}={_fmt(seg.value)}", size=10,
                      color=color)
        lx += 130
    return _svg(width, height, body)


def render_stacked(stacked):
    """Per-instance output columns in contiguous group blocks."""
    n = stacked.phi_columns.shape[0]
    if n == 0:
        raise ValueError("no instances to plot")
    col_w = max(2.0, min(6.0, 640.0 / n))
    width = int(n * col_w) + 120
    height = 200
    body = ""
    x0 = 60
    for label, cols in stacked.groups:
        if not cols:
            continue
        gx0 = x0 + cols[0] * col_w
        gx1 = x0 + (cols[-1] + 1) * col_w
        body += (f'<rect x="{gx0:.1f}" y="30" width="{gx1 - gx0:.1f}" height="140" '
                 f'fill="none" stroke="#bbbbbb"/>\n')
        body += _text((gx0 + gx1) / 2, 185, label, anchor="middle", size=10)
    for pos in range(n):
        v = float(stacked.model_outputs[pos])
        bar_h = 136 * v
        color = RED if v >= 0.5 else BLUE
        body += (f'<rect x="{x0 + pos * col_w:.1f}" y="{168 - bar_h:.1f}" '
                 f'width="{col_w * 0.9:.1f}" height="{bar_h:.1f}" fill="{color}" '
                 f'fill-opacity="0.8"/>\n')
    body += _text(10, 100, "p(attack)", size=10, color=GREY)
    body += _text(x0, 20, f"base {_fmt(stacked.base_value)}", size=10, color=GREY)
    return _svg(width, height, body)


def render_lime_bars(attr, top=10):
    """Signed horizontal bars; orange supports attack, blue supports normal."""
    idx = [i for i in np.argsort(-np.abs(attr.phi), kind="stable") if attr.phi[i] != 0]
    idx = idx[:top]
    if not idx:
        idx = [0]
    width, row_h, left = 700, 22, 260
    height = len(idx) * row_h + 70
    span = max(float(np.abs(attr.phi).max()), 1e-12)
    mid_x = left + (width - left - 20) / 2
    scale = (width - left - 20) / 2 / span

    p_att = attr.model_output
    body = _text(20, 22, f"p(normal)={_fmt(1 - p_att)}  p(attack)={_fmt(p_att)}")
    body += (f'<line x1="{mid_x:.1f}" y1="36" x2="{mid_x:.1f}" '
             f'y2="{height - 30}" stroke="#cccccc"/>\n')
    for r, fi in enumerate(idx):
        cy = 50 + r * row_h
        phi = float(attr.phi[fi])
        color = ORANGE if phi > 0 else BLUE
        x1 = mid_x + phi * scale
        body += _text(left - 8, cy + 4,
                      f"{attr.feature_names[fi]}={_fmt(float(attr.instance[fi]))}",
                      anchor="end", size=10)
        body += (f'<rect x="{min(mid_x, x1):.1f}" y="{cy - 7}" '
                 f'width="{abs(x1 - mid_x):.1f}" height="14" fill="{color}" '
                 f'fill-opacity="0.85"/>\n')
    body += _text(width - 20, height - 10, "supports attack", anchor="end",
                  size=10, color=ORANGE)
    body += _text(left, height - 10, "supports normal", size=10, color=BLUE)
    return _svg(width, height, body)


def render_report(report: dict):
    """Dispatch on a report bundle's kind; raises on non-plottable kinds."""
    from types import SimpleNamespace

    kind = report.get("kind")
    payload = report.get("payload", {})
    if kind == "shap_summary":
        summary = SimpleNamespace(
            feature_names=payload["ranking"],
            phi_matrix=np.column_stack(
                [np.asarray(f["phi"]) for f in payload["top_features"]])
            if payload["top_features"] else np.zeros((0, 0)),
            value_matrix=np.column_stack(
                [np.asarray(f["values"]) for f in payload["top_features"]])
            if payload["top_features"] else np.zeros((0, 0)),
            ranking=np.arange(len(payload["top_features"])),
        )
        summary.feature_names = [f["feature"] for f in payload["top_features"]]
        return render_summary(summary, top=len(payload["top_features"]))
    if kind == "force":
        force = SimpleNamespace(
            base_value=payload["base_value"],
            model_output=payload["model_output"],
            positive=[SimpleNamespace(**s) for s in payload["positive"]],
            negative=[SimpleNamespace(**s) for s in payload["negative"]],
        )
        return render_force(force)
    if kind == "stacked_force":
        stacked = SimpleNamespace(
            feature_names=payload["feature_names"],
            groups=[(g["label"], g["columns"]) for g in payload["groups"]],
            phi_columns=np.asarray(payload["phi_columns"]),
            model_outputs=np.asarray(payload["model_outputs"]),
            base_value=payload["base_value"],
        )
        return render_stacked(stacked)
    if kind in ("attribution_shap", "attribution_lime"):
        attr = SimpleNamespace(
            feature_names=payload["feature_names"],
            phi=np.asarray(payload["phi"]),
            instance=np.asarray(payload["instance"]),
            model_output=payload["model_output"],
        )
        return render_lime_bars(attr)
    raise ValueError(f"report kind {kind!r} has no plot rendering")
