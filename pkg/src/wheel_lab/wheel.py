"""Clockwise contour exploration of a plane tree and the space-filling curve it defines.

The curve is a circular word of *corner steps*.  A corner step at ``v`` arrives
along tree edge ``(v, arrive)`` and leaves along the next tree edge clockwise,
``(v, leave)``; the map angles swept in between (one per face met at ``v``)
are its *kites*.  Every angle of the plane map is swept exactly once, so the
kites tile the sphere and the union of the kites of any corner interval is the
region the curve covers during that interval.  The primal tree lies to the
right of the curve and the dual tree to the left.

Grid cells are visited at their first kite; that order defines the cell
sequence and, with an :class:`~wheel_lab.field.AreaMeasure`, the cumulative
area times.
"""

from __future__ import annotations

import dataclasses
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DecodeError, DegenerateMergeError, EmbeddingError, InputError, ParameterError, StructuralError
from .field import AreaMeasure
from .planar import PlanarMap, grid_map, tree_map
from .tree import PlanarTree, tree_from_children

__all__ = [
    "CornerStep",
    "WheelCurve",
    "DualTree",
    "DiskReport",
    "contour_exploration",
    "dual_tree",
    "disk_check",
    "area_parametrization",
    "mass_between",
    "visit_order_predicate",
    "recover_trees",
    "side_check",
    "map_for",
]


@dataclass(frozen=True)
class CornerStep:
    vertex: int
    arrive: int
    leave: int
    side: int  # +1: ``leave`` is a child of ``vertex``; -1: it is the parent
    faces: tuple
    crossed: tuple  # map neighbours behind the non-tree edges separating consecutive faces


@dataclass(frozen=True, eq=False)
class WheelCurve:
    corners: tuple = field(repr=False)
    kite_angle: np.ndarray = field(repr=False)
    kite_corner: np.ndarray = field(repr=False)
    corner_start: np.ndarray = field(repr=False)
    cells: tuple = field(repr=False)
    cell_corner: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    n_cells: int
    center_cell: int | None
    pmap: PlanarMap = field(repr=False)

    @property
    def n_corners(self) -> int:
        return len(self.corners)

    @property
    def n_kites(self) -> int:
        return len(self.kite_angle)

    @property
    def center_time(self) -> float:
        if self.center_cell is None or not self.cells:
            return 0.0
        return float(self.times[self.cells.index(self.center_cell)])

    @property
    def times_centered(self) -> np.ndarray:
        """Times shifted so the centre cell sits at 0."""
        return self.times - self.center_time

    def first_corner(self) -> dict:
        out = {}
        for k, c in enumerate(self.corners):
            out.setdefault(c.vertex, k)
        return out

    def to_dict(self) -> dict:
        return {
            "corners": [[c.vertex, c.arrive, c.leave, c.side, list(c.faces), list(c.crossed)] for c in self.corners],
            "cells": list(self.cells),
            "times": self.times.tolist(),
            "times_centered": self.times_centered.tolist(),
            "center_cell": self.center_cell,
        }


def map_for(tree: PlanarTree) -> PlanarMap:
    if tree.side is not None:
        return grid_map(tree.side, tree.wired)
    return tree_map([tree.tree_rotation(v) for v in range(tree.n_vertices)])


def _positions(pm: PlanarMap) -> list[dict]:
    return [{u: i for i, u in enumerate(rot)} for rot in pm.rotation]


def _uniform_times(k: int) -> np.ndarray:
    if k == 0:
        return np.zeros(0)
    t = np.arange(1, k + 1, dtype=np.float64) / k
    t[-1] = 1.0
    return t


def contour_exploration(tree: PlanarTree, mu: AreaMeasure | None = None) -> WheelCurve:
    """Clockwise depth-first contour starting at the root's distinguished corner."""
    pm = map_for(tree)
    pos = _positions(pm)
    root = tree.root
    first = tree.children[root]
    if not first:
        raise EmbeddingError("tree has no edges")
    tree_rot = [tree.tree_rotation(v) for v in range(tree.n_vertices)]
    tree_pos = [{u: i for i, u in enumerate(r)} for r in tree_rot]
    parent = tree.parent
    corners, kites, kcorner, cstart = [], [], [], []
    v, arrive = root, first[-1]
    start = (v, arrive)
    limit = 2 * tree.n_edges
    while True:
        tr = tree_rot[v]
        leave = tr[(tree_pos[v][arrive] + 1) % len(tr)]
        rot = pm.rotation[v]
        deg = len(rot)
        try:
            a, b = pos[v][arrive], pos[v][leave]
        except KeyError:
            raise EmbeddingError(f"tree edge at {v} missing from the plane map") from None
        span = deg if a == b else (b - a) % deg
        faces, crossed = [], []
        for j in range(span):
            i = (a + j) % deg
            kites.append(int(pm.angle_offset[v]) + i)
            kcorner.append(len(corners))
            faces.append(pm.face_at(v, i))
            if j:
                x = rot[i]
                if parent[x] == v or parent[v] == x:
                    raise EmbeddingError(f"children order at {v} disagrees with the clockwise rotation")
                crossed.append(x)
        cstart.append(len(kites) - span)
        side = 1 if parent[leave] == v else -1
        corners.append(CornerStep(v, arrive, leave, side, tuple(faces), tuple(crossed)))
        v, arrive = leave, v
        if (v, arrive) == start:
            break
        if len(corners) > limit:
            raise EmbeddingError("contour did not close")
    kite_angle = np.array(kites, dtype=np.int64)
    if len(kite_angle) != len(pm.angle_face) or len(np.unique(kite_angle)) != len(kite_angle):
        raise EmbeddingError("contour does not sweep every angle exactly once")
    faces_seq = pm.angle_face[kite_angle]
    seen, cells, cell_corner = set(), [], []
    for f, c in zip(faces_seq.tolist(), kcorner):
        if f < pm.n_cells and f not in seen:
            seen.add(f)
            cells.append(f)
            cell_corner.append(c)
    center = None
    if tree.side is not None and pm.n_cells:
        n = tree.side - 1
        center = (n // 2) * n + n // 2
    curve = WheelCurve(
        corners=tuple(corners),
        kite_angle=kite_angle,
        kite_corner=np.array(kcorner, dtype=np.int64),
        corner_start=np.array(cstart + [len(kites)], dtype=np.int64),
        cells=tuple(cells),
        cell_corner=np.array(cell_corner, dtype=np.int64),
        times=_uniform_times(len(cells)),
        n_cells=pm.n_cells,
        center_cell=center,
        pmap=pm,
    )
    return area_parametrization(curve, mu) if mu is not None else curve


def area_parametrization(curve: WheelCurve, mu: AreaMeasure) -> WheelCurve:
    """Time of the k-th visited cell = total mass of the first k visited cells."""
    if mu.cell_mass.size != curve.n_cells:
        raise InputError(f"measure has {mu.cell_mass.size} cells, curve has {curve.n_cells}")
    mass = mu.cell_mass.ravel()[list(curve.cells)]
    t = np.cumsum(mass)
    t = t / t[-1]
    t[-1] = 1.0
    if np.any(np.diff(t) <= 0):
        raise InputError("cell masses too small to give strictly increasing times")
    return dataclasses.replace(curve, times=t)


def mass_between(curve: WheelCurve, mu: AreaMeasure, a: float, b: float) -> float:
    """Measure of the cells whose visit time lies in ``[a, b]``."""
    sel = (curve.times >= a) & (curve.times <= b)
    idx = np.asarray(curve.cells)[sel]
    return float(mu.cell_mass.ravel()[idx].sum())


# --- dual tree ------------------------------------------------------------------------------


@dataclass(frozen=True)
class DualTree:
    n_faces: int
    n_cells: int
    root: int
    parent: np.ndarray = field(repr=False)
    edges: tuple = field(repr=False)  # (face, face, (a, b)) with (a, b) the crossed primal edge

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def _bfs_parent(n_faces: int, root: int, edges) -> np.ndarray:
    adj = [[] for _ in range(n_faces)]
    for f, g, _ in edges:
        adj[f].append(g)
        adj[g].append(f)
    parent = np.full(n_faces, -2, dtype=np.int64)
    parent[root] = -1
    q = deque([root])
    while q:
        f = q.popleft()
        for g in adj[f]:
            if parent[g] == -2:
                parent[g] = f
                q.append(g)
    return parent


def _finish_dual(n_faces: int, n_cells: int, root: int, edges, err) -> DualTree:
    parent = _bfs_parent(n_faces, root, edges)
    if np.any(parent == -2) or len(edges) != n_faces - 1:
        raise err(f"dual edges do not form a spanning tree ({len(edges)} edges, {n_faces} faces)")
    parent.setflags(write=False)
    return DualTree(n_faces, n_cells, root, parent, tuple(edges))


def dual_tree(tree: PlanarTree) -> DualTree:
    """Duals of the non-tree map edges, rooted at the face of the starting corner."""
    if tree.side is not None:
        expected = tree.side * tree.side + (1 if tree.wired else 0)
        orphans = np.count_nonzero(tree.parent < 0) - 1
        if tree.n_vertices != expected or orphans or not np.all(np.isfinite(tree.dist)):
            raise StructuralError("tree does not span the grid")
    pm = map_for(tree)
    pos = _positions(pm)
    tree_edges = {(min(v, p), max(v, p)) for v, p in tree.edges()}
    edges = []
    for a, b in pm.edges:
        if (a, b) in tree_edges:
            continue
        i = pos[a][b]
        f, g = pm.face_at(a, i), pm.face_at(a, i - 1)
        edges.append((min(f, g), max(f, g), (a, b)))
    edges.sort()
    root = tree.root
    start_face = pm.face_at(root, pos[root][tree.children[root][-1]])
    return _finish_dual(pm.n_faces, pm.n_cells, start_face, edges, StructuralError)


# --- decoding -------------------------------------------------------------------------------


def recover_trees(curve: WheelCurve) -> tuple[PlanarTree, DualTree]:
    """Rebuild the primal tree and the dual tree from the corner word alone."""
    cs = curve.corners
    if not cs:
        raise DecodeError("empty corner word")
    k = len(cs)
    traversals = {}
    for i, c in enumerate(cs):
        nxt = cs[(i + 1) % k]
        if nxt.vertex != c.leave or nxt.arrive != c.vertex:
            raise DecodeError(f"corner {i} does not connect to corner {(i + 1) % k}")
        e = (min(c.vertex, c.leave), max(c.vertex, c.leave))
        traversals.setdefault(e, []).append(c.side)
        if len(c.crossed) != max(len(c.faces) - 1, 0):
            raise DecodeError(f"corner {i} has inconsistent sweep data")
    if any(sorted(s) != [-1, 1] for s in traversals.values()):
        raise DecodeError("some tree edge is not traversed exactly once on each side")
    n = 1 + max(max(c.vertex, c.leave) for c in cs)
    children = [[] for _ in range(n)]
    for c in cs:
        if c.side == 1:
            children[c.vertex].append(c.leave)
    root = cs[0].vertex
    primal = tree_from_children(children, root=root)
    if len(primal.preorder) != len(traversals) + 1:
        raise DecodeError("descents do not form a tree")
    dual_edges = {}
    for c in cs:
        for f, g, x in zip(c.faces, c.faces[1:], c.crossed):
            e = (min(c.vertex, x), max(c.vertex, x))
            dual_edges[e] = (min(f, g), max(f, g), e)
    edges = sorted(dual_edges.values())
    n_faces = 1 + max(f for c in cs for f in c.faces)
    dual = _finish_dual(n_faces, curve.n_cells, cs[0].faces[0], edges, DecodeError)
    return primal, dual


# --- disk check -----------------------------------------------------------------------------


@dataclass(frozen=True)
class DiskReport:
    start: int
    length: int
    full_circle: bool
    cells: tuple
    vertices: tuple
    visited_cells: tuple
    euler_characteristic: int
    simply_connected: bool
    endpoints_on_boundary: bool

    @property
    def ok(self) -> bool:
        return self.simply_connected and self.endpoints_on_boundary

    def to_dict(self) -> dict:
        return {
            "start": self.start,
            "length": self.length,
            "full_circle": self.full_circle,
            "n_cells": len(self.cells),
            "n_vertices": len(self.vertices),
            "euler_characteristic": self.euler_characteristic,
            "simply_connected": self.simply_connected,
            "endpoints_on_boundary": self.endpoints_on_boundary,
        }


def kite_complex(curve: WheelCurve) -> tuple[np.ndarray, np.ndarray]:
    """Point ids ``(K, 4)`` and segment ids ``(K, 4)`` of each kite, in curve order.

    Kite at angle ``(v, i)`` has corners ``v``, midpoint of ``(v, rot[i])``,
    face centre, midpoint of ``(v, rot[i+1])``.  A mid-to-centre segment is
    named after the directed edge leaving the kite whose angle starts along it,
    so both kites sharing the segment agree on the id.
    """
    cached = curve.__dict__.get("_kite_complex")
    if cached is not None:
        return cached
    pm = curve.pmap
    pos = _positions(pm)
    nv, ne = pm.n_vertices, len(pm.edges)
    n_dir = len(pm.angle_face)
    pts = np.empty((curve.n_kites, 4), dtype=np.int64)
    segs = np.empty((curve.n_kites, 4), dtype=np.int64)
    offset = pm.angle_offset
    vert_of = np.repeat(np.arange(nv), np.diff(np.append(offset, n_dir)))
    for k, a in enumerate(curve.kite_angle.tolist()):
        v = int(vert_of[a])
        rot = pm.rotation[v]
        i = a - int(offset[v])
        u1, u2 = rot[i], rot[(i + 1) % len(rot)]
        f = int(pm.angle_face[a])
        e1, e2 = pm.edge(v, u1), pm.edge(v, u2)
        pts[k] = (v, nv + e1, nv + ne + f, nv + e2)
        d1 = a  # directed v -> u1 shares its id with the angle starting there
        d2 = int(offset[u2]) + pos[u2][v]  # directed u2 -> v
        segs[k] = (d1, n_dir + d1, n_dir + d2, (int(offset[v]) + (i + 1) % len(rot)))
    curve.__dict__["_kite_complex"] = (pts, segs)
    return pts, segs


def disk_check(curve: WheelCurve, start: int, length: int) -> DiskReport:
    """Topology of the region covered by corners ``start, ..., start + length - 1`` (mod n)."""
    n = curve.n_corners
    if length <= 0:
        raise ParameterError("interval must contain at least one corner")
    if length > n:
        raise ParameterError(f"interval longer than the circle ({length} > {n})")
    start %= n
    pts, segs = kite_complex(curve)
    cs = curve.corner_start
    k0 = int(cs[start])
    end = (start + length) % n
    k1 = int(cs[end]) if end else curve.n_kites
    K = curve.n_kites
    if length == n:
        sel = np.arange(K)
    elif k0 < k1 or (k0 == k1 and length < n and start < end):
        sel = np.arange(k0, k1)
    else:
        sel = np.concatenate([np.arange(k0, K), np.arange(0, k1)])
    full = length == n
    mask = np.zeros(K, dtype=bool)
    mask[sel] = True
    p_in = np.unique(pts[mask])
    chi = len(p_in) - len(np.unique(segs[mask])) + int(mask.sum())
    pm = curve.pmap
    nv, ne = pm.n_vertices, len(pm.edges)
    faces = pm.angle_face[curve.kite_angle[mask]]
    cells = tuple(sorted(set(int(f) for f in faces if f < pm.n_cells)))
    corner_ids = [(start + j) % n for j in range(length)]
    vertices = tuple(sorted({curve.corners[c].vertex for c in corner_ids}))
    cset = set(corner_ids)
    visited = tuple(sorted(int(f) for f, c in zip(curve.cells, curve.cell_corner.tolist()) if c in cset))
    if full:
        on_boundary = True
    else:
        p_out = set(np.unique(pts[~mask]).tolist())
        p_in_set = set(p_in.tolist())
        first, last = curve.corners[start], curve.corners[(start + length - 1) % n]
        ends = (nv + pm.edge(first.vertex, first.arrive), nv + pm.edge(last.vertex, last.leave))
        on_boundary = all(e in p_in_set and e in p_out for e in ends)
    simply = chi == 1 or (full and chi == 2)
    return DiskReport(start, length, full, cells, vertices, visited, int(chi), bool(simply), bool(on_boundary))


# --- order theorem --------------------------------------------------------------------------


def _branch_child(tree: PlanarTree, m: int, z: int) -> int:
    while int(tree.parent[z]) != m:
        z = int(tree.parent[z])
    return z


def _clockwise_from_parent(tree: PlanarTree, m: int) -> list[int]:
    """Tree neighbours of ``m`` clockwise, read off the plane map rather than ``tree.children``."""
    if tree.side is None:
        return list(tree.tree_rotation(m))
    rot = list(map_for(tree).rotation[m])
    p = int(tree.parent[m])
    nbrs = [u for u in rot if u == p or int(tree.parent[u]) == m]
    if p >= 0:
        i = nbrs.index(p)
    else:
        i = nbrs.index(min(nbrs))
    return nbrs[i:] + nbrs[:i]


def visit_order_predicate(curve: WheelCurve, tree: PlanarTree, z: int, w: int) -> tuple[bool, bool]:
    """(hit_before, right_merge) for two vertices neither of which is an ancestor of the other.

    ``hit_before``: the curve's first corner at ``z`` precedes its first corner at ``w``.
    ``right_merge``: at the branch point, the branch toward ``z`` comes before the
    branch toward ``w`` clockwise from the edge toward the root, i.e. the path
    from ``z`` joins the path from ``w`` on the latter's right.
    """
    if z == w:
        raise ParameterError("z and w must differ")
    m = tree.lca(z, w)
    if m in (z, w):
        raise DegenerateMergeError(f"{z} and {w} lie on a common root path")
    first = curve.__dict__.get("_first_corner")
    if first is None:
        first = curve.first_corner()
        curve.__dict__["_first_corner"] = first
    hit_before = first[z] < first[w]
    order = _clockwise_from_parent(tree, m)
    right_merge = order.index(_branch_child(tree, m, z)) < order.index(_branch_child(tree, m, w))
    return hit_before, right_merge


# --- zipper side check ----------------------------------------------------------------------


def _cross2(d, q) -> float:
    return float(d[0] * q[1] - d[1] * q[0])


def side_check(curve: WheelCurve, tree: PlanarTree) -> tuple[int, int]:
    """Count curve crossings with the primal tree on the right and the dual tree on the left.

    Only crossings whose geometry lies inside the unit square are checked
    (super-root edges and exterior faces have no planar position).
    """
    if tree.side is None:
        raise InputError("side check needs a grid-embedded tree")
    side = tree.side
    n = side - 1
    spacing = 1.0 / n
    pos = tree.positions
    pm = curve.pmap

    def center(f):
        r, c = divmod(f, n)
        return np.array([(c + 0.5) * spacing, (r + 0.5) * spacing])

    checked = ok = 0
    cs = curve.corners
    for i, c in enumerate(cs):
        v = c.vertex
        for f1, f2, x in zip(c.faces, c.faces[1:], c.crossed):
            if f1 >= pm.n_cells or f2 >= pm.n_cells or x >= side * side:
                continue
            mid = (pos[v] + pos[x]) / 2
            p = (pos[v] + mid) / 2
            d = center(f2) - center(f1)
            checked += 1
            ok += _cross2(d, pos[v] - p) < 0 < _cross2(d, mid - p)
        w = c.leave
        nxt = cs[(i + 1) % len(cs)]
        f = c.faces[-1]
        if f >= pm.n_cells or v >= side * side or w >= side * side or nxt.faces[0] != f:
            continue
        mid = (pos[v] + pos[w]) / 2
        cf = center(f)
        p = (mid + cf) / 2
        d = pos[w] - pos[v]
        checked += 1
        ok += _cross2(d, mid - p) < 0 < _cross2(d, cf - p)
    return checked, ok
