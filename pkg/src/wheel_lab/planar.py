"""Rotation systems and face tracing for the corner grid (optionally wired to a super-root).

Rotations are clockwise.  Angle ``i`` at vertex ``v`` is the sector swept
clockwise from ``rotation[v][i]`` to ``rotation[v][i + 1]``; tracing a face
moves from angle ``(v, i)`` along the edge to ``w = rotation[v][i + 1]`` and
continues at the angle of ``w`` that starts at the edge back to ``v``.

The super-root sits at infinity: seen from outside the sphere its clockwise
order is the boundary cycle taken counterclockwise in the plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import EmbeddingError


def boundary_cycle(side: int) -> list[int]:
    """Boundary vertices counterclockwise in the plane, starting at vertex 0."""
    if side == 1:
        return [0]
    bottom = [c for c in range(side)]
    right = [r * side + side - 1 for r in range(1, side)]
    top = [(side - 1) * side + c for c in range(side - 2, -1, -1)]
    left = [r * side for r in range(side - 2, 0, -1)]
    return bottom + right + top + left


def _outward(side: int, v: int) -> tuple[int, int]:
    r, c = divmod(v, side)
    dx = -1 if c == 0 else (1 if c == side - 1 else 0)
    dy = -1 if r == 0 else (1 if r == side - 1 else 0)
    return dx, dy


@lru_cache(maxsize=8)
def grid_rotation(side: int, wired: bool) -> tuple[tuple[int, ...], ...]:
    """Clockwise neighbour order at every grid vertex (and the super-root ``side**2`` when wired)."""
    n_grid = side * side
    sroot = n_grid
    rot = []
    for v in range(n_grid):
        r, c = divmod(v, side)
        nbrs = []
        if c > 0:
            nbrs.append((math.pi, v - 1))
        if r < side - 1:
            nbrs.append((math.pi / 2, v + side))
        if c < side - 1:
            nbrs.append((0.0, v + 1))
        if r > 0:
            nbrs.append((-math.pi / 2, v - side))
        if wired and (r in (0, side - 1) or c in (0, side - 1)):
            dx, dy = _outward(side, v)
            nbrs.append((math.atan2(dy, dx), sroot))
        nbrs.sort(key=lambda t: -t[0])
        rot.append(tuple(u for _, u in nbrs))
    if wired:
        rot.append(tuple(boundary_cycle(side)))
    return tuple(rot)


@dataclass(frozen=True, eq=False)
class PlanarMap:
    """A connected plane map with faces.

    Faces ``0 .. n_cells-1`` are grid cells (cell ``(r, c)`` has id ``r*(side-1)+c``);
    the remaining faces are exterior (outer face or wedges at the super-root).
    """

    rotation: tuple
    edge_ids: dict
    edges: tuple
    angle_offset: np.ndarray
    angle_face: np.ndarray
    n_faces: int
    n_cells: int

    @property
    def n_vertices(self) -> int:
        return len(self.rotation)

    def edge(self, a: int, b: int) -> int:
        return self.edge_ids[(a, b) if a < b else (b, a)]

    def angle(self, v: int, i: int) -> int:
        return int(self.angle_offset[v]) + i % len(self.rotation[v])

    def face_at(self, v: int, i: int) -> int:
        return int(self.angle_face[self.angle(v, i)])

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges) + self.n_faces


def _edge_table(rotation, ordered_edges=None):
    if ordered_edges is None:
        ordered_edges = sorted({(min(v, u), max(v, u)) for v, nb in enumerate(rotation) for u in nb})
    ids = {e: i for i, e in enumerate(ordered_edges)}
    return ids, tuple(ordered_edges)


def trace_faces(rotation) -> tuple[np.ndarray, np.ndarray, list[list[int]]]:
    """Return (angle offsets, face label per angle, angle lists per face in discovery order)."""
    deg = np.array([len(r) for r in rotation], dtype=np.int64)
    offset = np.concatenate([[0], np.cumsum(deg)[:-1]]).astype(np.int64)
    pos = [{u: i for i, u in enumerate(nb)} for nb in rotation]
    label = np.full(int(deg.sum()), -1, dtype=np.int64)
    faces = []
    for v0 in range(len(rotation)):
        for i0 in range(deg[v0]):
            if label[offset[v0] + i0] >= 0:
                continue
            fid = len(faces)
            angles = []
            v, i = v0, i0
            while label[offset[v] + i] < 0:
                a = offset[v] + i
                label[a] = fid
                angles.append(int(a))
                w = rotation[v][(i + 1) % deg[v]]
                if v not in pos[w]:
                    raise EmbeddingError(f"rotation at {w} does not list neighbour {v}")
                v, i = w, pos[w][v]
            if (v, i) != (v0, i0):
                raise EmbeddingError("face walk did not close; rotation system is inconsistent")
            faces.append(angles)
    return offset, label, faces


def _angle_vertex(offset: np.ndarray, a: int) -> int:
    return int(np.searchsorted(offset, a, side="right") - 1)


def _signed_area(cycle, side: int) -> float:
    pts = [divmod(v, side)[::-1] for v in cycle]
    return 0.5 * sum(x0 * y1 - x1 * y0 for (x0, y0), (x1, y1) in zip(pts, pts[1:] + pts[:1]))


@lru_cache(maxsize=8)
def grid_map(side: int, wired: bool) -> PlanarMap:
    rotation = grid_rotation(side, wired)
    n_grid = side * side
    ids = np.arange(n_grid).reshape(side, side)
    grid_edges = [(int(a), int(b)) for a, b in zip(ids[:, :-1].ravel(), ids[:, 1:].ravel())]
    grid_edges += [(int(a), int(b)) for a, b in zip(ids[:-1, :].ravel(), ids[1:, :].ravel())]
    if wired:
        grid_edges += [(v, n_grid) for v in boundary_cycle(side)]
    edge_ids, edges = _edge_table(rotation, grid_edges)
    offset, label, faces = trace_faces(rotation)
    n_cells = (side - 1) ** 2
    remap = {}
    exterior = []
    for fid, angles in enumerate(faces):
        cycle = [_angle_vertex(offset, a) for a in angles]
        verts = sorted(cycle)
        if len(verts) == 4 and verts[-1] < n_grid and _signed_area(cycle, side) > 0:
            r, c = divmod(verts[0], side)
            if verts == [verts[0], verts[0] + 1, verts[0] + side, verts[0] + side + 1]:
                remap[fid] = r * (side - 1) + c
                continue
        exterior.append((tuple(verts), fid))
    for k, (_, fid) in enumerate(sorted(exterior)):
        remap[fid] = n_cells + k
    face_of = np.array([remap[int(f)] for f in label], dtype=np.int64)
    pm = PlanarMap(rotation, edge_ids, edges, offset, face_of, len(faces), n_cells)
    if pm.euler_characteristic() != 2:
        raise EmbeddingError(f"grid map is not spherical (V-E+F = {pm.euler_characteristic()})")
    return pm


def tree_map(rotation) -> PlanarMap:
    """Plane map of a bare tree: a single (exterior) face."""
    edge_ids, edges = _edge_table(rotation)
    offset, label, faces = trace_faces(rotation)
    pm = PlanarMap(tuple(tuple(r) for r in rotation), edge_ids, edges, offset, label, len(faces), 0)
    if pm.euler_characteristic() != 2:
        raise EmbeddingError("rotation system does not describe a plane tree")
    return pm
