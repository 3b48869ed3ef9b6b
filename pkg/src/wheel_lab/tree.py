"""Geodesic trees on the metric grid, confluence structures and half-zipper checks.

A wired tree models the root at infinity by a super-root (id ``side**2``)
joined by zero-weight edges to every boundary vertex.  A point tree is the
shortest-path tree of a single grid vertex.  Children are stored in clockwise
order starting just after the parent edge; at the root the order starts with
the lowest-id child, which fixes the starting corner of the contour.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import AmbiguityError, EmptyAnnulusError, InputError, ParameterError
from .metric import MetricGrid, dijkstra
from .planar import grid_rotation

__all__ = [
    "WIRED",
    "PlanarTree",
    "Subtree",
    "CrossingSet",
    "AgreementReport",
    "HalfZipperReport",
    "build_geodesic_tree",
    "tree_from_children",
    "crossing_set",
    "confluence_radius",
    "compare_trees",
    "compare_root_modes",
    "short_hair_subtree",
    "subtree_diameters",
    "verify_half_zipper",
    "articulation_points",
    "hairy_check",
]

WIRED = "wired-boundary"
CENTER = (0.5, 0.5)
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class PlanarTree:
    parent: np.ndarray = field(repr=False)
    children: tuple = field(repr=False)
    root: int
    positions: np.ndarray = field(repr=False)
    dist: np.ndarray = field(repr=False)
    side: int | None = None
    wired: bool = False

    @property
    def n_vertices(self) -> int:
        return len(self.parent)

    @property
    def n_edges(self) -> int:
        return self.n_vertices - 1

    @property
    def super_root(self) -> int | None:
        return self.side * self.side if self.wired else None

    def is_leaf(self, v: int) -> bool:
        return v != self.root and not self.children[v]

    def edges(self) -> list[tuple[int, int]]:
        """(child, parent) pairs."""
        return [(v, int(p)) for v, p in enumerate(self.parent) if p >= 0]

    def tree_rotation(self, v: int) -> tuple[int, ...]:
        """Clockwise cyclic order of tree neighbours at ``v`` (parent first when present)."""
        p = int(self.parent[v])
        return ((p,) if p >= 0 else ()) + tuple(self.children[v])

    @cached_property
    def depth(self) -> np.ndarray:
        d = np.zeros(self.n_vertices, dtype=np.int64)
        for v in self.preorder:
            if v != self.root:
                d[v] = d[self.parent[v]] + 1
        return d

    @cached_property
    def preorder(self) -> list[int]:
        order, stack = [], [self.root]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(reversed(self.children[v]))
        return order

    def path_to_root(self, v: int) -> list[int]:
        path = [v]
        while path[-1] != self.root:
            path.append(int(self.parent[path[-1]]))
        return path

    def lca(self, a: int, b: int) -> int:
        depth = self.depth
        while depth[a] > depth[b]:
            a = int(self.parent[a])
        while depth[b] > depth[a]:
            b = int(self.parent[b])
        while a != b:
            a, b = int(self.parent[a]), int(self.parent[b])
        return a

    def tree_path(self, a: int, b: int) -> list[int]:
        m = self.lca(a, b)
        up = []
        v = a
        while v != m:
            up.append(v)
            v = int(self.parent[v])
        down = []
        v = b
        while v != m:
            down.append(v)
            v = int(self.parent[v])
        return up + [m] + down[::-1]

    def is_ancestor(self, a: int, b: int) -> bool:
        """True when ``a`` lies on the path from ``b`` to the root."""
        return self.lca(a, b) == a

    def subtree(self, v: int) -> list[int]:
        out, stack = [], [v]
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(self.children[u])
        return out

    def grid_vertices(self) -> range:
        return range(self.side * self.side) if self.side else range(self.n_vertices)


def _order_children(parent: np.ndarray, rotation, root: int) -> tuple:
    kids = [[] for _ in range(len(parent))]
    for v, p in enumerate(parent.tolist()):
        if p >= 0:
            kids[p].append(v)
    out = []
    for v, rot in enumerate(rotation):
        if not kids[v]:
            out.append(())
            continue
        ks = set(kids[v])
        if v == root:
            seq = [u for u in rot if u in ks]
            i = seq.index(min(seq))
            seq = seq[i:] + seq[:i]
        else:
            i = rot.index(int(parent[v]))
            seq = [u for u in rot[i + 1:] + rot[:i] if u in ks]
        out.append(tuple(seq))
    return tuple(out)


def tree_from_children(children, root: int = 0, positions=None) -> PlanarTree:
    """Abstract plane tree from clockwise children lists (no grid embedding)."""
    n = len(children)
    parent = np.full(n, -1, dtype=np.int64)
    for v, ks in enumerate(children):
        for k in ks:
            parent[k] = v
    if positions is None:
        positions = np.full((n, 2), np.nan)
    t = PlanarTree(parent, tuple(tuple(k) for k in children), root, np.asarray(positions, float), np.zeros(n))
    d = np.zeros(n)
    for v in t.preorder[1:]:
        d[v] = d[parent[v]] + 1.0
    object.__setattr__(t, "dist", d)
    return t


def build_geodesic_tree(m: MetricGrid, root: str | int = WIRED) -> PlanarTree:
    """Shortest-path tree; ``root`` is ``"wired-boundary"`` or a grid vertex id."""
    side = m.side
    n_grid = m.n_vertices
    pos = m.positions()
    if isinstance(root, str):
        if root != WIRED:
            raise ParameterError(f"unknown root mode {root!r}")
        sroot = n_grid
        sp = dijkstra(m.adjacency, n_grid, m.boundary_vertices(), source_parent=sroot)
        parent = np.append(sp.parent, -1)
        dist = np.append(sp.dist, 0.0)
        tied = sp.tied
        rotation = grid_rotation(side, True)
        pos = np.vstack([pos, [np.nan, np.nan]])
        root_id, wired = sroot, True
    else:
        root_id = m.check_vertex(root)
        sp = dijkstra(m.adjacency, n_grid, [root_id])
        parent, dist, tied = sp.parent, sp.dist, sp.tied
        rotation = grid_rotation(side, False)
        wired = False
    if m.tie_eps == 0.0 and tied.any():
        raise AmbiguityError(
            f"{int(tied.sum())} vertices have tied shortest paths; build the metric with tie_eps > 0"
        )
    parent.setflags(write=False)
    dist.setflags(write=False)
    pos.setflags(write=False)
    children = _order_children(parent, rotation, root_id)
    return PlanarTree(parent, children, root_id, pos, dist, side, wired)


# --- confluence -----------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossingSet:
    center: int
    t: float
    s: float
    points: frozenset

    def __len__(self) -> int:
        return len(self.points)


def crossing_set(tree: PlanarTree, z: int, t: float, s: float) -> CrossingSet:
    """Radius-``t`` crossing vertices of all tree paths from ``z`` to vertices with D-distance >= ``s``.

    The crossing vertex of a path is its first vertex at distance >= ``t``.
    """
    if not 0.0 < t < s:
        raise ParameterError(f"need 0 < t < s, got t={t}, s={s}")
    if tree.wired or tree.root != z:
        raise InputError(f"crossing sets need a point tree rooted at {z}")
    dist, parent = tree.dist, tree.parent
    cross = np.full(tree.n_vertices, -1, dtype=np.int64)
    for v in np.argsort(dist, kind="stable").tolist():
        if v == z or dist[v] < t:
            continue
        p = parent[v]
        cross[v] = v if dist[p] < t else cross[p]
    far = np.flatnonzero(dist >= s)
    if far.size == 0:
        raise EmptyAnnulusError(f"no vertex at distance >= {s} from {z}")
    return CrossingSet(z, float(t), float(s), frozenset(int(x) for x in np.unique(cross[far])))


def _euclid_from_center(tree: PlanarTree) -> np.ndarray:
    d = np.hypot(tree.positions[:, 0] - CENTER[0], tree.positions[:, 1] - CENTER[1])
    return np.where(np.isnan(d), np.inf, d)


def _ball_sources(tree: PlanarTree, r: float) -> list[int]:
    d = _euclid_from_center(tree)
    src = np.flatnonzero(d <= r)
    if src.size == 0:
        src = np.array([int(np.argmin(d))])
    return src.tolist()


def confluence_candidates(r: float, half_width: float = 0.5) -> list[float]:
    if r == 0.0:
        return [0.0]
    out, k = [], 0
    while r * (1.0 + 0.25 * k) <= half_width + 1e-12:
        out.append(r * (1.0 + 0.25 * k))
        k += 1
    return out


def confluence_radius(tree: PlanarTree, r: float) -> float | None:
    """Smallest candidate ``R`` such that all tree paths from ``B_r(center)`` agree outside ``B_R``.

    Candidates are ``r, 1.25r, 1.5r, ...`` up to the half-width 0.5; ``None``
    when none works at this grid size.
    """
    if not 0.0 <= r < 0.5:
        raise ParameterError(f"r must lie in [0, 0.5), got {r}")
    d = _euclid_from_center(tree)
    paths = [np.array(tree.path_to_root(v)) for v in _ball_sources(tree, r)]
    for R in confluence_candidates(r):
        ref = None
        for p in paths:
            outside = frozenset(p[d[p] >= R].tolist())
            if ref is None:
                ref = outside
            elif outside != ref:
                break
        else:
            return R
    return None


@dataclass(frozen=True)
class AgreementReport:
    radius: float
    ball_size: int
    compared: int
    agreement: float
    witnesses: tuple

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "ball_size": self.ball_size,
            "compared": self.compared,
            "agreement": self.agreement,
            "witnesses": list(self.witnesses),
        }


def compare_trees(a: PlanarTree, b: PlanarTree, R: float) -> AgreementReport:
    """Parent agreement on the Euclidean ball ``|x - center| < R``.

    A vertex is compared when at least one of its two parents also lies in the
    ball; it agrees when both parents coincide.
    """
    d = _euclid_from_center(a)
    ball = set(np.flatnonzero(d < R).tolist())
    compared, bad = 0, []
    for v in sorted(ball):
        pa, pb = int(a.parent[v]), int(b.parent[v])
        if pa not in ball and pb not in ball:
            continue
        compared += 1
        if pa != pb:
            bad.append(v)
    frac = 1.0 if compared == 0 else (compared - len(bad)) / compared
    return AgreementReport(float(R), len(ball), compared, frac, tuple(bad))


def compare_root_modes(m: MetricGrid, R: float, z_far: int) -> AgreementReport:
    z_far = m.check_vertex(z_far)
    x, y = m.positions()[z_far]
    if math.hypot(x - CENTER[0], y - CENTER[1]) < R:
        raise ParameterError(f"z_far={z_far} lies inside B_R(center)")
    return compare_trees(build_geodesic_tree(m, WIRED), build_geodesic_tree(m, z_far), R)


# --- short hair -----------------------------------------------------------------------------


def _cross(o, a, b) -> int:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _hull(points) -> list:
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def subtree_diameters(tree: PlanarTree) -> np.ndarray:
    """Euclidean diameter of each subtree's embedded vertices (root of a wired tree excluded)."""
    cached = tree.__dict__.get("_subtree_diam")
    if cached is not None:
        return cached
    if tree.side is None:
        raise InputError("subtree diameters need a grid-embedded tree")
    side, spacing = tree.side, 1.0 / (tree.side - 1)
    hulls = [None] * tree.n_vertices
    diam = np.zeros(tree.n_vertices)
    for v in reversed(tree.preorder):
        pts = []
        if v < side * side:
            pts.append(divmod(v, side)[::-1])
        for k in tree.children[v]:
            pts.extend(hulls[k])
            hulls[k] = None
        h = _hull(pts)
        hulls[v] = h
        if len(h) > 1:
            a = np.array(h)
            d2 = ((a[:, None, :] - a[None, :, :]) ** 2).sum(-1).max()
            diam[v] = math.sqrt(d2) * spacing
    diam.setflags(write=False)
    tree.__dict__["_subtree_diam"] = diam
    return diam


@dataclass(frozen=True)
class Subtree:
    tree: PlanarTree = field(repr=False)
    eps: float
    vertices: frozenset

    def __contains__(self, v) -> bool:
        return v in self.vertices

    def __len__(self) -> int:
        return len(self.vertices)

    def components(self) -> list[list[int]]:
        """Branches of ``tree - T``: full subtrees hanging off the core."""
        t = self.tree
        return [t.subtree(v) for v in range(t.n_vertices) if v not in self.vertices and t.parent[v] in self.vertices]


def short_hair_subtree(tree: PlanarTree, eps: float) -> Subtree:
    """Core left after detaching every maximal branch of diameter < eps."""
    if not 0.0 < eps <= SQRT2:
        raise ParameterError(f"eps must lie in (0, sqrt(2)], got {eps}")
    diam = subtree_diameters(tree)
    keep = np.flatnonzero(diam >= eps).tolist()
    return Subtree(tree, float(eps), frozenset(keep) | {tree.root})


# --- half-zipper axioms ---------------------------------------------------------------------


def _undirected(tree: PlanarTree) -> list[list[int]]:
    adj = [[] for _ in range(tree.n_vertices)]
    for v, p in tree.edges():
        adj[v].append(p)
        adj[p].append(v)
    return adj


def articulation_points(adj) -> set[int]:
    """Iterative Hopcroft-Tarjan low-link search over an undirected adjacency list."""
    n = len(adj)
    disc = [-1] * n
    low = [0] * n
    out = set()
    timer = 0
    for s in range(n):
        if disc[s] >= 0:
            continue
        disc[s] = low[s] = timer
        timer += 1
        root_kids = 0
        stack = [(s, -1, iter(adj[s]))]
        while stack:
            v, pv, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                if stack:
                    u = stack[-1][0]
                    low[u] = min(low[u], low[v])
                    if u != s and low[v] >= disc[u]:
                        out.add(u)
                continue
            if nxt == pv:
                continue
            if disc[nxt] >= 0:
                low[v] = min(low[v], disc[nxt])
            else:
                disc[nxt] = low[nxt] = timer
                timer += 1
                if v == s:
                    root_kids += 1
                stack.append((nxt, v, iter(adj[nxt])))
        if root_kids > 1:
            out.add(s)
    return out


def removal_disconnects(tree: PlanarTree, u: int) -> bool:
    """Component labelling of ``tree - u``: are u's descendants cut off from the root?"""
    a, b = [], []
    for v, p in tree.edges():
        if u not in (v, p):
            a.append(v)
            b.append(p)
    n = tree.n_vertices
    g = csr_matrix((np.ones(len(a)), (a, b)), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    root_label = labels[tree.root]
    return all(labels[k] != root_label for c in tree.children[u] for k in tree.subtree(c))


@dataclass(frozen=True)
class HalfZipperReport:
    density: bool
    unique_paths: bool
    cut_points: bool
    n_vertices: int
    n_internal: int
    sampled_removals: int
    sampled_removals_ok: int

    @property
    def ok(self) -> bool:
        return (self.density and self.unique_paths and self.cut_points
                and self.sampled_removals_ok == self.sampled_removals)

    def to_dict(self) -> dict:
        return {
            "density": self.density,
            "unique_paths": self.unique_paths,
            "cut_points": self.cut_points,
            "n_vertices": self.n_vertices,
            "n_internal": self.n_internal,
            "sampled_removals": self.sampled_removals,
            "sampled_removals_ok": self.sampled_removals_ok,
            "ok": self.ok,
        }


def verify_half_zipper(tree: PlanarTree, samples: int = 0, seed: int = 0) -> HalfZipperReport:
    """Density (spanning), unique paths (connected + acyclic) and cut points.

    Leaves are exempt from the cut-point check: they are the starting points of
    geodesics, which the geodesic tree excludes.  ``samples`` internal vertices
    are additionally re-checked by explicit component labelling.
    """
    n = tree.n_vertices
    parent = tree.parent
    if tree.side is not None:
        expected = tree.side * tree.side + (1 if tree.wired else 0)
        density = n == expected and bool(np.all(np.isfinite(tree.dist)))
    else:
        density = True
    adj = _undirected(tree)
    seen = [False] * n
    seen[tree.root] = True
    q = deque([tree.root])
    while q:
        v = q.popleft()
        for u in adj[v]:
            if not seen[u]:
                seen[u] = True
                q.append(u)
    n_edges = int(np.count_nonzero(parent >= 0))
    unique_paths = all(seen) and n_edges == n - 1 and int(parent[tree.root]) == -1
    internal = [v for v in range(n) if v != tree.root and tree.children[v]]
    cut = articulation_points(adj)
    cut_points = all(v in cut for v in internal)
    ok = 0
    picks = []
    if samples and internal:
        rng = np.random.default_rng(seed)
        picks = rng.choice(internal, size=min(samples, len(internal)), replace=False).tolist()
        ok = sum(removal_disconnects(tree, u) for u in picks)
    return HalfZipperReport(density, unique_paths, cut_points, n, len(internal), len(picks), ok)


def hairy_check(tree: PlanarTree, path) -> tuple[bool, bool]:
    """(left, right): does a tree branch attach to an interior path vertex on that side?

    Sides are taken relative to the path's orientation: the right side at
    ``v_i`` is the sector swept clockwise from the forward edge to the backward edge.
    """
    path = [int(v) for v in path]
    if len(set(path)) != len(path):
        raise InputError("path is not simple")
    for a, b in zip(path, path[1:]):
        if tree.parent[a] != b and tree.parent[b] != a:
            raise InputError(f"({a}, {b}) is not a tree edge")
    left = right = False
    for prev, v, nxt in zip(path, path[1:], path[2:]):
        rot = tree.tree_rotation(v)
        i = rot.index(nxt)
        seq = rot[i + 1:] + rot[:i]
        j = seq.index(prev)
        if j > 0:
            right = True
        if j < len(seq) - 1:
            left = True
    return left, right
