"""Minimal static SVG charts (no plotting dependencies)."""

from xml.sax.saxutils import escape

FONT = 'font-family="sans-serif" font-size="11"'
COLORS = ("#4c72b0", "#dd8452", "#55a868", "#c44e52")


def _fmt(v):
    return f"{v:.2f}".rstrip("0").rstrip(".") if v != int(v) else str(int(v))


def _doc(width, height, body, title):
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n'
            f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-family="sans-serif" '
            f'font-size="14">{escape(title)}</text>\n')
    return head + "\n".join(body) + "\n</svg>\n"


def hbar_chart(labels, values, title="", width=640, bar_height=16):
    """Horizontal bars centred on zero; first label drawn at the top."""
    left, right, top = 200, 30, 34
    height = top + bar_height * max(len(labels), 1) + 30
    span = max((abs(v) for v in values), default=0.0) or 1.0
    plot_w = width - left - right
    zero = left + plot_w / 2
    scale = plot_w / 2 / span
    body = [f'<line x1="{zero:.1f}" y1="{top}" x2="{zero:.1f}" y2="{height - 26}" stroke="black"/>']
    for i, (lab, v) in enumerate(zip(labels, values)):
        y = top + i * bar_height
        w = abs(v) * scale
        x = zero if v >= 0 else zero - w
        color = COLORS[0] if v >= 0 else COLORS[3]
        body.append(f'<rect x="{x:.2f}" y="{y + 2}" width="{w:.2f}" height="{bar_height - 4}" fill="{color}"/>')
        body.append(f'<text x="{left - 6}" y="{y + bar_height - 4}" text-anchor="end" {FONT}>{escape(lab)}</text>')
    axis_y = height - 12
    body.append(f'<text x="{left}" y="{axis_y}" {FONT}>{-span:.3g}</text>')
    body.append(f'<text x="{width - right}" y="{axis_y}" text-anchor="end" {FONT}>{span:.3g}</text>')
    return _doc(width, height, body, title)


def grouped_bar_chart(categories, series, series_names, title="", width=640, height=320):
    """Vertical grouped bars: ``series[k][i]`` is the value of series k at category i."""
    left, right, top, bottom = 50, 20, 40, 90
    plot_w, plot_h = width - left - right, height - top - bottom
    vmax = max((v for s in series for v in s), default=0) or 1
    n = max(len(categories), 1)
    group_w = plot_w / n
    bar_w = group_w * 0.8 / max(len(series), 1)
    base = top + plot_h
    body = [f'<line x1="{left}" y1="{base}" x2="{width - right}" y2="{base}" stroke="black"/>',
            f'<text x="{left - 4}" y="{top + 4}" text-anchor="end" {FONT}>{_fmt(vmax)}</text>']
    for i, cat in enumerate(categories):
        gx = left + i * group_w + group_w * 0.1
        for k, s in enumerate(series):
            h = s[i] / vmax * plot_h
            body.append(f'<rect x="{gx + k * bar_w:.2f}" y="{base - h:.2f}" width="{bar_w:.2f}" '
                        f'height="{h:.2f}" fill="{COLORS[k % len(COLORS)]}"/>')
        cx = left + (i + 0.5) * group_w
        body.append(f'<text x="{cx:.1f}" y="{base + 12}" text-anchor="end" {FONT} '
                    f'transform="rotate(-60 {cx:.1f} {base + 12})">{escape(str(cat))}</text>')
    for k, name in enumerate(series_names):
        y = 30 + 14 * k
        body.append(f'<rect x="{width - right - 90}" y="{y - 9}" width="10" height="10" '
                    f'fill="{COLORS[k % len(COLORS)]}"/>')
        body.append(f'<text x="{width - right - 76}" y="{y}" {FONT}>{escape(name)}</text>')
    return _doc(width, height, body, title)


def scatter(groups, names, title="", width=480, height=480):
    """``groups`` is a list of (n, 2) coordinate arrays, one marker style per group."""
    pad = 40
    pts = [p for g in groups for p in g]
    if pts:
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    else:
        x0 = y0 = 0.0
        x1 = y1 = 1.0
    sx = (width - 2 * pad) / ((x1 - x0) or 1.0)
    sy = (height - 2 * pad) / ((y1 - y0) or 1.0)
    body = [f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
            f'fill="none" stroke="#999"/>']
    for k, g in enumerate(groups):
        color = COLORS[k % len(COLORS)]
        for x, y in g:
            cx, cy = pad + (x - x0) * sx, height - pad - (y - y0) * sy
            if k == 0:
                body.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="none" stroke="{color}"/>')
            else:
                body.append(f'<path d="M{cx - 3:.2f},{cy:.2f}h6M{cx:.2f},{cy - 3:.2f}v6" stroke="{color}"/>')
    for k, name in enumerate(names):
        body.append(f'<text x="{pad + 4}" y="{pad + 14 + 14 * k}" fill="{COLORS[k % len(COLORS)]}" '
                    f'{FONT}>{escape(name)}</text>')
    return _doc(width, height, body, title)
