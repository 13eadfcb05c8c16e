"""SVG pictures of states in the Klein disk.

Each vertex is drawn as its dual cell, the polygon of surrounding triangle
centers, filled by the palette color of its grain count; geodesic boundaries
are straight chords in the Klein model, so the polygons are exact.  Output is
deterministic: fixed 6-decimal coordinates, cells in vertex-id order.

The default palette anchors the grayscale used throughout: 0 black, 3 dark
grey, 5 light grey, 6 white, with the remaining stable values interpolated,
-1 (a bookkeeping value) in blue, and 7 in red for unstable sites.  Values
outside [-1, 7] fall back to a loud sentinel color and raise a warning.
A palette file overrides single entries with ``value=#rrggbb`` lines.
"""

from __future__ import annotations

import re
import warnings

import numpy as np

from .geometry import Embedding, radial_scale

DEFAULT_PALETTE = {
    -1: "#3355dd",
    0: "#000000",
    1: "#1c1c1c",
    2: "#3a3a3a",
    3: "#585858",
    4: "#9a9a9a",
    5: "#c8c8c8",
    6: "#ffffff",
    7: "#cc2222",
}

SENTINEL_COLOR = "#ff00ff"

_SUBPIXEL_RADIUS = 1.0 - 1e-4


def parse_palette(text: str) -> dict:
    """Parse ``value=#rrggbb`` lines into a palette overlay."""
    palette = dict(DEFAULT_PALETTE)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        key, sep, color = line.partition("=")
        color = color.strip()
        if (not sep or not _is_color(color)):
            raise ValueError(f"palette line {lineno}: expected value=#rrggbb, got {raw!r}")
        try:
            value = int(key.strip())
        except ValueError as exc:
            raise ValueError(f"palette line {lineno}: bad value {key!r}") from exc
        palette[value] = color.lower()
    return palette


def _is_color(text: str) -> bool:
    if len(text) != 7 or not text.startswith("#"):
        return False
    try:
        int(text[1:], 16)
    except ValueError:
        return False
    return True


def load_palette(path) -> dict:
    with open(path, "r", encoding="ascii") as fh:
        return parse_palette(fh.read())


def _fill_for(value: int, palette: dict) -> str:
    try:
        return palette[int(value)]
    except KeyError:
        warnings.warn(f"no palette entry for grain value {value}; using sentinel")
        return SENTINEL_COLOR


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def render_state(state, embedding: Embedding, *, palette=None,
                 homothety: float = 1.0, edges: str = "none",
                 size: int = 800, skip_subpixel: bool = True,
                 zoom=None, stroke: str = "#404040") -> str:
    """Render a state (or, with ``state=None``, just the tiling) to SVG text.

    ``homothety`` rescales hyperbolic distance from the root before
    projecting; 1.0 is the plain Klein picture, and small ratios spread the
    outer rings apart (for ratios other than 1 the picture is refit to the
    viewport).  ``edges`` draws the graph ("primal"), the cell boundaries
    ("dual"), "both", or "none".  ``zoom = (cx, cy, mag)`` magnifies around a
    Klein-plane point; cells falling outside the window are culled.  With
    ``skip_subpixel`` cells whose final radius exceeds 1 - 1e-4 are dropped.
    """
    if state is not None and state.ball is not embedding.ball \
            and state.ball != embedding.ball:
        raise ValueError("state and embedding use different balls")
    if edges not in ("none", "primal", "dual", "both"):
        raise ValueError(f"unknown edges mode {edges!r}")
    if homothety <= 0:
        raise ValueError("homothety ratio must be positive")
    palette = dict(DEFAULT_PALETTE) if palette is None else palette
    ball = embedding.ball

    vk = radial_scale(embedding.vertex_pos, homothety)
    cell_k = [radial_scale(c, homothety) for c in embedding.cells]
    if homothety != 1.0:
        top = max(float(np.abs(k).max(initial=0.0)) for k in ([vk] + cell_k))
        if top > 0:
            fit = 0.98 / max(top, 1e-12)
            vk = vk * fit
            cell_k = [k * fit for k in cell_k]
    # a cell is "subpixel" by its size on screen: the rim cutoff loosens in
    # proportion to any zoom magnification
    cell_radius = np.hypot(vk[:, 0], vk[:, 1])
    skip_beyond = _SUBPIXEL_RADIUS
    if zoom is not None:
        cx, cy, mag = (float(t) for t in zoom)
        if mag <= 0:
            raise ValueError("zoom magnification must be positive")
        center = np.array([cx, cy])
        vk = (vk - center) * mag
        cell_k = [(k - center) * mag for k in cell_k]
        skip_beyond = 1.0 - (1.0 - _SUBPIXEL_RADIUS) / mag

    half = size / 2.0

    def to_px(points):
        pts = np.atleast_2d(points)
        xs = (pts[:, 0] + 1.0) * half
        ys = (1.0 - pts[:, 1]) * half
        return xs, ys

    grains = state.grains if state is not None else None
    fill_cells = grains is not None
    draw_dual = edges in ("dual", "both")
    draw_primal = edges in ("primal", "both")

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="#ffffff"/>',
    ]
    if homothety == 1.0 and zoom is None:
        parts.append(
            f'<circle cx="{_fmt(half)}" cy="{_fmt(half)}" r="{_fmt(half * 0.9999)}" '
            f'fill="none" stroke="#888888" stroke-width="1"/>')

    if fill_cells or draw_dual:
        attrs = f' stroke="{stroke}" stroke-width="0.5"' if draw_dual else ""
        parts.append(f"<g{attrs}>")
        for v in range(ball.n):
            if skip_subpixel and cell_radius[v] > skip_beyond:
                continue
            pts = cell_k[v]
            if zoom is not None and _outside_window(pts):
                continue
            fill = _fill_for(grains[v], palette) if fill_cells else "none"
            xs, ys = to_px(pts)
            if len(xs) < 3:
                parts.append(
                    f'<circle id="v{v}" cx="{_fmt(xs[0])}" cy="{_fmt(ys[0])}" '
                    f'r="3" fill="{fill}"/>')
                continue
            coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
            parts.append(f'<polygon id="v{v}" points="{coords}" fill="{fill}"/>')
        parts.append("</g>")

    if draw_primal:
        parts.append('<g stroke="#000000" stroke-width="0.6">')
        for u, w in ball.edges():
            seg = vk[[u, w]]
            if zoom is not None and _outside_window(seg):
                continue
            xs, ys = to_px(seg)
            parts.append(
                f'<line x1="{_fmt(xs[0])}" y1="{_fmt(ys[0])}" '
                f'x2="{_fmt(xs[1])}" y2="{_fmt(ys[1])}"/>')
        parts.append("</g>")

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _outside_window(points: np.ndarray, limit: float = 1.05) -> bool:
    pts = np.atleast_2d(points)
    return bool(pts[:, 0].max() < -limit or pts[:, 0].min() > limit
                or pts[:, 1].max() < -limit or pts[:, 1].min() > limit)


def render_tiling(embedding: Embedding, *, edges: str = "both", **kwargs) -> str:
    """Edge diagram of the ball without any state coloring."""
    return render_state(None, embedding, edges=edges, **kwargs)


def cell_fills(svg_text: str) -> dict:
    """Map vertex id to fill color for every cell in rendered SVG text."""
    out = {}
    pattern = re.compile(r'<(?:polygon|circle) id="v(\d+)"[^>]*fill="([^"]+)"')
    for match in pattern.finditer(svg_text):
        out[int(match.group(1))] = match.group(2)
    return out


def color_histogram(svg_text: str) -> dict:
    """Count rendered cells by fill color (a structural fingerprint)."""
    hist = {}
    for color in cell_fills(svg_text).values():
        hist[color] = hist.get(color, 0) + 1
    return hist
