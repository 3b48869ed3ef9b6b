"""LFPP weights on the corner grid, Dijkstra distances, balls and geodesics.

Vertex ids are row-major over the ``side x side`` corner grid: ``v = r * side + c``,
with planar position ``(x, y) = (c, r) * spacing`` (y axis pointing up).

Edge weights are snapped to a power-of-two quantum chosen from an upper bound
on every shortest-path length.  All path lengths are then exact float sums, so
distances are exactly symmetric and independent of summation order.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np

from .errors import AmbiguityError, DegeneratePathError, ParameterError, VertexIndexError
from .field import GridField

__all__ = [
    "MetricGrid",
    "GeodesicPath",
    "ShortestPaths",
    "build_metric",
    "default_xi",
    "dimension_estimate",
    "shortest_paths",
    "distance",
    "metric_ball",
    "geodesic",
]

DEFAULT_TIE_EPS = 1e-9
_JITTER_TAG = 0x6A17
_U64 = (1 << 64) - 1


def dimension_estimate(gamma: float) -> float:
    """Approximate LQG dimension ``2 + gamma^2/2 + gamma/sqrt(6)`` (exact 4 at sqrt(8/3))."""
    return 2.0 + gamma * gamma / 2.0 + gamma / math.sqrt(6.0)


def default_xi(gamma: float) -> float:
    """Conventional LFPP exponent ``gamma / d_gamma``; external calibration, override freely."""
    return gamma / dimension_estimate(gamma)


@dataclass(frozen=True)
class MetricGrid:
    field: GridField = dc_field(repr=False)
    xi: float
    tie_eps: float
    seed: int
    vertex_weight: np.ndarray = dc_field(repr=False)
    tie_jitter: np.ndarray = dc_field(repr=False)
    edge_u: np.ndarray = dc_field(repr=False)
    edge_v: np.ndarray = dc_field(repr=False)
    edge_weight: np.ndarray = dc_field(repr=False)
    quantum: float

    @property
    def side(self) -> int:
        return self.field.side

    @property
    def spacing(self) -> float:
        return self.field.spacing

    @property
    def n_vertices(self) -> int:
        return self.side * self.side

    @property
    def n_edges(self) -> int:
        return len(self.edge_u)

    def vertex_id(self, r: int, c: int) -> int:
        if not (0 <= r < self.side and 0 <= c < self.side):
            raise VertexIndexError(f"({r}, {c}) outside {self.side}x{self.side} grid")
        return r * self.side + c

    def coords(self, v: int) -> tuple[int, int]:
        self.check_vertex(v)
        return divmod(int(v), self.side)

    def positions(self) -> np.ndarray:
        r, c = np.divmod(np.arange(self.n_vertices), self.side)
        return np.column_stack([c, r]).astype(np.float64) * self.spacing

    def check_vertex(self, v) -> int:
        if not isinstance(v, (int, np.integer)) or not 0 <= v < self.n_vertices:
            raise VertexIndexError(f"invalid vertex id {v!r}")
        return int(v)

    def is_boundary(self, v: int) -> bool:
        r, c = divmod(v, self.side)
        return r in (0, self.side - 1) or c in (0, self.side - 1)

    def boundary_vertices(self) -> list[int]:
        return [v for v in range(self.n_vertices) if self.is_boundary(v)]

    def edge_id(self, a: int, b: int) -> int:
        eid = self._edge_index.get((min(a, b), max(a, b)))
        if eid is None:
            raise VertexIndexError(f"({a}, {b}) is not a grid edge")
        return eid

    @cached_property
    def _edge_index(self) -> dict:
        return {(int(a), int(b)): i for i, (a, b) in enumerate(zip(self.edge_u, self.edge_v))}

    @cached_property
    def adjacency(self) -> list:
        """``adjacency[v]`` lists ``(neighbor, weight)`` sorted by neighbor id; read-only by convention."""
        adj = [[] for _ in range(self.n_vertices)]
        for a, b, w in zip(self.edge_u.tolist(), self.edge_v.tolist(), self.edge_weight.tolist()):
            adj[a].append((b, w))
            adj[b].append((a, w))
        for lst in adj:
            lst.sort()
        return adj


def _grid_edges(side: int) -> tuple[np.ndarray, np.ndarray]:
    """Horizontal edges first (row-major), then vertical edges (row-major)."""
    ids = np.arange(side * side).reshape(side, side)
    hu, hv = ids[:, :-1].ravel(), ids[:, 1:].ravel()
    vu, vv = ids[:-1, :].ravel(), ids[1:, :].ravel()
    return np.concatenate([hu, vu]), np.concatenate([hv, vv])


def _jitter(seed: int, side: int, n_edges: int, tie_eps: float) -> np.ndarray:
    """Stratified jitter: one random stratum per edge keeps the factors pairwise distinct."""
    if tie_eps == 0.0:
        return np.zeros(n_edges)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & _U64, _JITTER_TAG, side])))
    strata = rng.permutation(n_edges)
    u = rng.random(n_edges)
    return tie_eps * (strata + 0.25 + 0.5 * u) / n_edges


def _path_length_bound(w: np.ndarray, side: int) -> float:
    """Upper bound on every vertex's distance from the centre via row-then-column paths."""
    n_h = side * (side - 1)
    wh = w[:n_h].reshape(side, side - 1)
    wv = w[n_h:].reshape(side - 1, side)
    rc = side // 2
    row = np.concatenate([[0.0], np.cumsum(wh[rc])])
    col = np.vstack([np.zeros(side), np.cumsum(wv, axis=0)])
    hor = np.abs(row - row[rc])
    vert = np.abs(col - col[rc][None, :])
    return float((hor[None, :] + vert).max())


def build_metric(field: GridField, xi: float, tie_eps: float = DEFAULT_TIE_EPS, seed: int | None = None) -> MetricGrid:
    xi = float(xi)
    if not xi > 0.0:
        raise ParameterError(f"xi must be > 0, got {xi}")
    tie_eps = float(tie_eps)
    if not 0.0 <= tie_eps < 1e-6:
        raise ParameterError(f"tie_eps must lie in [0, 1e-6), got {tie_eps}")
    seed = field.seed if seed is None else int(seed)
    side = field.side
    vw = field.spacing * np.exp(xi * field.vertex_values)
    if not np.all(np.isfinite(vw)) or not np.all(vw > 0):
        raise ParameterError("vertex weights overflowed; reduce xi")
    eu, ev = _grid_edges(side)
    flat = vw.ravel()
    jit = _jitter(seed, side, len(eu), tie_eps)
    w = (flat[eu] + flat[ev]) / 2.0 * (1.0 + jit)
    bound = 1.01 * (2.0 * _path_length_bound(w, side) + 2.0 * float(w.max()))
    quantum = 2.0 ** (math.ceil(math.log2(bound)) - 52)
    wq = np.rint(w / quantum) * quantum
    if not np.all(wq > 0):
        raise ParameterError("edge weight below the length quantum; field range too wide for this xi")
    for a in (vw, jit, wq):
        a.setflags(write=False)
    return MetricGrid(
        field=field, xi=xi, tie_eps=tie_eps, seed=seed, vertex_weight=vw, tie_jitter=jit,
        edge_u=eu, edge_v=ev, edge_weight=wq, quantum=quantum,
    )


@dataclass(frozen=True)
class ShortestPaths:
    """Single- or multi-source Dijkstra output.  ``parent`` is -1 at sources (or ``root_id``)."""

    dist: np.ndarray
    parent: np.ndarray
    tied: np.ndarray


def dijkstra(adj, n_vertices: int, sources, source_parent: int = -1, cutoff: float = math.inf,
             target: int | None = None) -> ShortestPaths:
    """Binary-heap Dijkstra with exact tie detection and lowest-id parent tie-breaking."""
    inf = math.inf
    dist = [inf] * n_vertices
    parent = [-1] * n_vertices
    tied = [False] * n_vertices
    done = [False] * n_vertices
    heap = []
    for s in sources:
        dist[s] = 0.0
        parent[s] = source_parent
        heap.append((0.0, s))
    heapq.heapify(heap)
    pop, push = heapq.heappop, heapq.heappush
    while heap:
        d, u = pop(heap)
        if done[u]:
            continue
        if d >= cutoff:
            break
        done[u] = True
        if u == target:
            break
        for v, w in adj[u]:
            if done[v]:
                continue
            nd = d + w
            dv = dist[v]
            if nd < dv:
                dist[v] = nd
                parent[v] = u
                tied[v] = False
                push(heap, (nd, v))
            elif nd == dv:
                tied[v] = True
                if u < parent[v]:
                    parent[v] = u
    return ShortestPaths(np.array(dist), np.array(parent, dtype=np.int64), np.array(tied))


def shortest_paths(m: MetricGrid, source: int, cutoff: float = math.inf, target: int | None = None) -> ShortestPaths:
    source = m.check_vertex(source)
    return dijkstra(m.adjacency, m.n_vertices, [source], cutoff=cutoff, target=target)


def distance(m: MetricGrid, z: int, w: int) -> float:
    z, w = m.check_vertex(z), m.check_vertex(w)
    if z == w:
        return 0.0
    a, b = min(z, w), max(z, w)
    return float(shortest_paths(m, a, target=b).dist[b])


def metric_ball(m: MetricGrid, z: int, t: float) -> set[int]:
    """Open ball ``{w : D(z, w) < t}``."""
    z = m.check_vertex(z)
    if t < 0:
        raise ParameterError(f"radius must be >= 0, got {t}")
    sp = shortest_paths(m, z, cutoff=t)
    return {int(v) for v in np.flatnonzero(sp.dist < t)}


@dataclass(frozen=True)
class GeodesicPath:
    vertices: tuple[int, ...]
    length: float

    def __len__(self) -> int:
        return len(self.vertices)


def geodesic(m: MetricGrid, z: int, w: int) -> GeodesicPath:
    z, w = m.check_vertex(z), m.check_vertex(w)
    if z == w:
        raise DegeneratePathError("geodesic endpoints coincide")
    a, b = min(z, w), max(z, w)
    sp = shortest_paths(m, a, target=b)
    path = [b]
    while path[-1] != a:
        path.append(int(sp.parent[path[-1]]))
    if m.tie_eps == 0.0 and any(sp.tied[v] for v in path):
        raise AmbiguityError(f"shortest path {z}->{w} is not unique; build the metric with tie_eps > 0")
    path.reverse()  # now a -> b
    if a != z:
        path.reverse()
    return GeodesicPath(tuple(path), float(sp.dist[b]))
