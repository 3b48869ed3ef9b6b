"""Deterministic SVG and PNG figures of a pipeline state.

Layers are independent groups drawn bottom to top in ``ALL_LAYERS`` order.
Coordinates are written with three decimals, so identical states give
identical SVG bytes.  The PNG is a raster of the same primitives.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .errors import DependencyError, ParameterError
from .metric import geodesic

ALL_LAYERS = ("ball-heatmap", "geodesics", "tree", "dual-tree", "wheel-path", "short-hair-subtree")
_NEEDS = {
    "ball-heatmap": "metric",
    "geodesics": "metric",
    "tree": "tree",
    "dual-tree": "dual",
    "wheel-path": "curve",
    "short-hair-subtree": "subtrees",
}
SIZE = 512
MARGIN = 24
LEVELS = 256


def palette(k: int) -> tuple[int, int, int]:
    """Dark blue to yellow.  The red channel equals ``k``, so colours decode back to their rank."""
    t = k / (LEVELS - 1)
    return (int(k), int(round(40 + 190 * t)), int(round(140 - 120 * t)))


def heat_indices(dist: np.ndarray) -> np.ndarray:
    """Palette index per vertex, nondecreasing in distance."""
    d = np.asarray(dist, dtype=np.float64)
    top = float(d.max())
    if top <= 0:
        return np.zeros(d.shape, dtype=np.int64)
    return np.minimum((d / top * (LEVELS - 1)).astype(np.int64), LEVELS - 1)


def _hex(rgb) -> str:
    return "#%02x%02x%02x" % rgb


class _Canvas:
    """Collects primitives once and emits them to both SVG and PNG."""

    def __init__(self, side: int):
        self.side = side
        self.scale = SIZE / (side - 1)
        self.groups: list[tuple[str, list]] = []

    def xy(self, p) -> tuple[float, float]:
        x, y = float(p[0]), float(p[1])
        return (round(MARGIN + x * SIZE, 3), round(MARGIN + (1.0 - y) * SIZE, 3))

    def group(self, name: str) -> list:
        items: list = []
        self.groups.append((name, items))
        return items

    def svg(self) -> str:
        w = SIZE + 2 * MARGIN
        out = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{w}" viewBox="0 0 {w} {w}">',
            f'<rect x="0" y="0" width="{w}" height="{w}" fill="#ffffff"/>',
        ]
        for name, items in self.groups:
            out.append(f'<g id="{name}">')
            for it in items:
                out.append(_svg_item(it))
            out.append("</g>")
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def png(self) -> Image.Image:
        w = SIZE + 2 * MARGIN
        img = Image.new("RGB", (w, w), (255, 255, 255))
        draw = ImageDraw.Draw(img)
        for _, items in self.groups:
            for it in items:
                kind = it[0]
                if kind == "rect":
                    _, x, y, s, fill, _cls = it
                    draw.rectangle([x, y, x + s - 1, y + s - 1], fill=fill)
                elif kind == "line":
                    _, a, b, color, width, _cls = it
                    draw.line([a, b], fill=color, width=max(1, int(round(width))))
                elif kind == "poly":
                    _, pts, color, width = it
                    draw.line(pts, fill=color, width=max(1, int(round(width))))
        return img


def _f(x: float) -> str:
    return f"{x:.3f}"


def _svg_item(it) -> str:
    kind = it[0]
    if kind == "rect":
        _, x, y, s, fill, cls = it
        return f'<rect class="{cls}" x="{_f(x)}" y="{_f(y)}" width="{_f(s)}" height="{_f(s)}" fill="{_hex(fill)}"/>'
    if kind == "line":
        _, a, b, color, width, cls = it
        return (f'<line class="{cls}" x1="{_f(a[0])}" y1="{_f(a[1])}" x2="{_f(b[0])}" y2="{_f(b[1])}" '
                f'stroke="{_hex(color)}" stroke-width="{width}"/>')
    _, pts, color, width = it
    coords = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
    return f'<polyline points="{coords}" fill="none" stroke="{_hex(color)}" stroke-width="{width}"/>'


def _outward(side: int, v: int) -> np.ndarray:
    r, c = divmod(v, side)
    dx = -1 if c == 0 else (1 if c == side - 1 else 0)
    dy = -1 if r == 0 else (1 if r == side - 1 else 0)
    return np.array([dx, dy], dtype=np.float64)


def _stub(side: int, v: int, pos) -> np.ndarray:
    """Where the edge from boundary vertex ``v`` toward the super-root is drawn to."""
    return pos[v] + 0.5 * _outward(side, v) / (side - 1)


def _center_distances(state) -> np.ndarray:
    pt = state.ensure_point_tree()
    return np.asarray(pt.dist[: state.field.side ** 2])


def _layer_heatmap(cv: _Canvas, state, items) -> None:
    side = state.field.side
    idx = heat_indices(_center_distances(state))
    pos = state.metric.positions()
    s = cv.scale
    for v in range(side * side):
        x, y = cv.xy(pos[v])
        items.append(("rect", round(x - s / 2, 3), round(y - s / 2, 3), round(s, 3), palette(int(idx[v])), "heat"))


def geodesic_targets(side: int) -> list[int]:
    n = side - 1
    mids = [(0, n // 2), (n // 2, 0), (n, n // 2), (n // 2, n)]
    corners = [(0, 0), (0, n), (n, 0), (n, n)]
    return sorted({r * side + c for r, c in corners + mids})


def _layer_geodesics(cv: _Canvas, state, items) -> None:
    m = state.metric
    pos = m.positions()
    src = state.center_vertex
    for t in geodesic_targets(m.side):
        if t == src:
            continue
        g = geodesic(m, src, t)
        items.append(("poly", [cv.xy(pos[v]) for v in g.vertices], (200, 30, 30), 2))


def _layer_tree(cv: _Canvas, state, items, tree=None, color=(40, 40, 40), width=1, keep=None, cls="tree-edge") -> None:
    tree = state.tree if tree is None else tree
    side = tree.side
    pos = tree.positions
    for v, p in tree.edges():
        if keep is not None and (v not in keep or p not in keep):
            continue
        if p == tree.super_root:
            items.append(("line", cv.xy(pos[v]), cv.xy(_stub(side, v, pos)), color, width, "root-edge"))
        else:
            items.append(("line", cv.xy(pos[v]), cv.xy(pos[p]), color, width, cls))


def _face_point(pm, side: int, f: int, edge, pos) -> np.ndarray:
    n = side - 1
    if f < pm.n_cells:
        r, c = divmod(f, n)
        return np.array([(c + 0.5) / n, (r + 0.5) / n])
    a, b = edge
    if b >= side * side:  # root edge: its wedges sit just outside the boundary vertex
        return _stub(side, a, pos)
    mid = (pos[a] + pos[b]) / 2
    oa, ob = _outward(side, a), _outward(side, b)
    return mid + 0.5 * np.where(oa == ob, oa, 0.0) / n


def _layer_dual(cv: _Canvas, state, items) -> None:
    from .wheel import map_for

    tree = state.tree
    pm = map_for(tree)
    side = tree.side
    pos = tree.positions
    for f, g, (a, b) in state.dual.edges:
        if b >= side * side:
            mid = _stub(side, a, pos)
        else:
            mid = (pos[a] + pos[b]) / 2
        pf, pg = _face_point(pm, side, f, (a, b), pos), _face_point(pm, side, g, (a, b), pos)
        items.append(("line", cv.xy(pf), cv.xy(mid), (40, 110, 200), 1, "dual-edge"))
        items.append(("line", cv.xy(mid), cv.xy(pg), (40, 110, 200), 1, "dual-edge"))


def wheel_points(curve, tree) -> list[np.ndarray]:
    """One point per kite at a grid vertex, nudged into the kite's angle."""
    pm = curve.pmap
    side = tree.side
    pos = tree.positions
    offs = pm.angle_offset
    n_grid = side * side
    vert_of = np.searchsorted(offs, curve.kite_angle, side="right") - 1
    pts = []
    for a, v in zip(curve.kite_angle.tolist(), vert_of.tolist()):
        if v >= n_grid:
            continue
        rot = pm.rotation[v]
        i = a - int(offs[v])
        p = pos[v].copy()
        for u in (rot[i], rot[(i + 1) % len(rot)]):
            q = _stub(side, v, pos) if u >= n_grid else (pos[v] + pos[u]) / 2
            p += 0.5 * (q - pos[v])
        pts.append(p)
    return pts


def _layer_wheel(cv: _Canvas, state, items) -> None:
    pts = wheel_points(state.curve, state.tree)
    items.append(("poly", [cv.xy(p) for p in pts + pts[:1]], (30, 60, 220), 1))


def _layer_short_hair(cv: _Canvas, state, items) -> None:
    shades = [(0, 150, 60), (230, 120, 0), (170, 0, 170), (0, 160, 160)]
    for k, eps in enumerate(sorted(state.subtrees, reverse=True)):
        keep = state.subtrees[eps].vertices
        _layer_tree(cv, state, items, color=shades[k % len(shades)], width=3 if k == 0 else 2, keep=keep,
                    cls=f"short-hair-{k}")


_DRAW = {
    "ball-heatmap": _layer_heatmap,
    "geodesics": _layer_geodesics,
    "tree": _layer_tree,
    "dual-tree": _layer_dual,
    "wheel-path": _layer_wheel,
    "short-hair-subtree": _layer_short_hair,
}


def parse_layers(selection) -> tuple[str, ...]:
    if isinstance(selection, str):
        selection = [s.strip() for s in selection.split(",") if s.strip()]
    layers = tuple(selection)
    if not layers:
        raise ParameterError("at least one layer is required")
    unknown = [x for x in layers if x not in _DRAW]
    if unknown:
        raise ParameterError(f"unknown layers {unknown}; choose from {list(ALL_LAYERS)}")
    return layers


def render_svg(state, layers) -> tuple[str, _Canvas]:
    layers = parse_layers(layers)
    for layer in layers:
        stage = _NEEDS[layer]
        if not getattr(state, stage, None):
            raise DependencyError(f"layer {layer!r} needs the {stage!r} stage, which was not computed")
    cv = _Canvas(state.field.side)
    for layer in ALL_LAYERS:
        if layer in layers:
            _DRAW[layer](cv, state, cv.group(layer))
    return cv.svg(), cv


def render(state, layers, out) -> tuple[Path, Path]:
    """Write ``<out>.svg`` and ``<out>.png``."""
    out = Path(out)
    if out.suffix in (".svg", ".png"):
        out = out.with_suffix("")
    svg, cv = render_svg(state, layers)
    out.parent.mkdir(parents=True, exist_ok=True)
    svg_path, png_path = out.with_suffix(".svg"), out.with_suffix(".png")
    svg_path.write_text(svg)
    cv.png().save(png_path, format="PNG", optimize=False)
    return svg_path, png_path
