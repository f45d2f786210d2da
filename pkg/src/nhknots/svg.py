"""Plain SVG output for heatmaps and line plots, no plotting dependency."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

# discrete palette for integer winding numbers (index = |w| mod len)
WINDING_PALETTE = ["#f7f7f7", "#92c5de", "#4393c3", "#f4a582", "#d6604d", "#b2182b", "#2166ac", "#fddbc7"]
FLAG_COLOR = "#222222"
# anchors of a perceptually ordered ramp for continuous values
RAMP = [(0.0, (68, 1, 84)), (0.25, (59, 82, 139)), (0.5, (33, 145, 140)), (0.75, (94, 201, 98)), (1.0, (253, 231, 37))]

COLOR_SCALE_DOC = {
    "winding": {"palette": WINDING_PALETTE, "index": "abs(w) mod palette length", "flagged": FLAG_COLOR},
    "continuous": {"ramp": RAMP, "normalization": "linear between min and max of the data"},
}


def ramp_color(x: float) -> str:
    x = min(max(float(x), 0.0), 1.0)
    for (x0, c0), (x1, c1) in zip(RAMP, RAMP[1:]):
        if x <= x1:
            f = 0.0 if x1 == x0 else (x - x0) / (x1 - x0)
            r, g, b = (round(a + f * (b_ - a)) for a, b_ in zip(c0, c1))
            return f"#{r:02x}{g:02x}{b:02x}"
    r, g, b = RAMP[-1][1]
    return f"#{r:02x}{g:02x}{b:02x}"


class _Frame:
    def __init__(self, width, height, xlim, ylim, margin=(60, 20, 20, 50)):
        self.width, self.height = width, height
        self.left, self.right, self.top, self.bottom = margin
        self.xlim, self.ylim = xlim, ylim

    def x(self, v):
        x0, x1 = self.xlim
        return self.left + (v - x0) / (x1 - x0) * (self.width - self.left - self.right)

    def y(self, v):
        y0, y1 = self.ylim
        return self.height - self.bottom - (v - y0) / (y1 - y0) * (self.height - self.top - self.bottom)

    def axes(self, xlabel, ylabel, ticks=5):
        parts = [
            f'<rect x="{self.left}" y="{self.top}" width="{self.width - self.left - self.right}" '
            f'height="{self.height - self.top - self.bottom}" fill="none" stroke="black"/>'
        ]
        for t in np.linspace(*self.xlim, ticks):
            parts.append(f'<text x="{self.x(t):.2f}" y="{self.height - self.bottom + 16}" font-size="11" text-anchor="middle">{t:.3g}</text>')
        for t in np.linspace(*self.ylim, ticks):
            parts.append(f'<text x="{self.left - 6}" y="{self.y(t) + 4:.2f}" font-size="11" text-anchor="end">{t:.3g}</text>')
        parts.append(f'<text x="{(self.left + self.width - self.right) / 2}" y="{self.height - 10}" font-size="13" text-anchor="middle">{escape(xlabel)}</text>')
        parts.append(
            f'<text x="16" y="{(self.top + self.height - self.bottom) / 2}" font-size="13" text-anchor="middle" '
            f'transform="rotate(-90 16 {(self.top + self.height - self.bottom) / 2})">{escape(ylabel)}</text>'
        )
        return parts


def _document(width, height, body) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )


def heatmap(grid, curves=None, title: str = "", width: int = 640, height: int = 520) -> str:
    """Cell heatmap of a PhaseDiagramGrid with optional (t2, lambda) curve overlays."""
    lam, t2 = grid.lambda_axis, grid.t2_axis
    dl = (lam[-1] - lam[0]) / max(len(lam) - 1, 1)
    dt = (t2[-1] - t2[0]) / max(len(t2) - 1, 1)
    frame = _Frame(width, height, (lam[0] - dl / 2, lam[-1] + dl / 2), (t2[0] - dt / 2, t2[-1] + dt / 2))
    body = []
    if title:
        body.append(f'<title>{escape(title)}</title>')
    finite = grid.values[~grid.flags]
    vmin = float(finite.min()) if finite.size else 0.0
    vmax = float(finite.max()) if finite.size else 1.0
    w_px = abs(frame.x(lam[0] + dl) - frame.x(lam[0]))
    h_px = abs(frame.y(t2[0] + dt) - frame.y(t2[0]))
    for i, ty in enumerate(t2):
        for j, lx in enumerate(lam):
            if grid.flags[i, j]:
                color = FLAG_COLOR
            elif grid.value_name == "w":
                color = WINDING_PALETTE[int(abs(grid.values[i, j])) % len(WINDING_PALETTE)]
            else:
                color = ramp_color((grid.values[i, j] - vmin) / (vmax - vmin) if vmax > vmin else 0.0)
            body.append(
                f'<rect x="{frame.x(lx - dl / 2):.2f}" y="{frame.y(ty + dt / 2):.2f}" '
                f'width="{w_px + 0.3:.2f}" height="{h_px + 0.3:.2f}" fill="{color}"/>'
            )
    for _key, pts in (curves or {}).items():
        pts = np.asarray(pts)
        if len(pts) < 2:
            continue
        inside = (pts[:, 1] >= frame.xlim[0]) & (pts[:, 1] <= frame.xlim[1])
        pts = pts[inside]
        if len(pts) < 2:
            continue
        path = " ".join(f"{frame.x(l):.2f},{frame.y(t):.2f}" for t, l in pts)
        body.append(f'<polyline points="{path}" fill="none" stroke="black" stroke-width="1.5"/>')
    body += frame.axes("lambda", "t2")
    return _document(width, height, body)


def line_plot(series: dict, xlabel: str, ylabel: str, width: int = 560, height: int = 400, logx: bool = False) -> str:
    """``series`` maps a label to (x, y) arrays; markers plus connecting lines."""
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    tx = np.log if logx else (lambda v: np.asarray(v, float))
    x0, x1 = float(tx(xs).min()), float(tx(xs).max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    pad = 0.05 * (y1 - y0)
    frame = _Frame(width, height, (x0, x1), (y0 - pad, y1 + pad))
    body = []
    for n, (label, (x, y)) in enumerate(series.items()):
        color = ramp_color(n / max(len(series) - 1, 1))
        pts = " ".join(f"{frame.x(a):.2f},{frame.y(b):.2f}" for a, b in zip(tx(x), y))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>')
        for a, b in zip(tx(x), y):
            body.append(f'<circle cx="{frame.x(a):.2f}" cy="{frame.y(b):.2f}" r="2.5" fill="{color}"/>')
        body.append(f'<text x="{width - 30}" y="{30 + 15 * n}" font-size="11" text-anchor="end" fill="{color}">{escape(str(label))}</text>')
    body += frame.axes(f"log {xlabel}" if logx else xlabel, ylabel)
    return _document(width, height, body)
