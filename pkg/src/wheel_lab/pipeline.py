"""End-to-end orchestration: field, metric, tree and wheel, then the check blocks.

The report JSON is canonical (sorted keys, 17-significant-digit floats) and
depends only on the config.  Wall-clock timings are kept on the in-memory
report and written to a separate ``timings.json`` so report bytes stay stable.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from dataclasses import field as dc_field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from .errors import ConfigurationError, WheelLabError
from .field import AreaMeasure, FieldMode, GridField, area_measure, covariance_report, sample_field
from .io import curve_to_json, fmt_float, geodesic_to_json, save_distances, save_field, tree_to_json
from .metric import MetricGrid, build_metric, default_xi, geodesic, shortest_paths
from .tree import (
    WIRED,
    PlanarTree,
    Subtree,
    build_geodesic_tree,
    compare_root_modes,
    confluence_radius,
    crossing_set,
    hairy_check,
    short_hair_subtree,
    verify_half_zipper,
)
from .wheel import (
    DualTree,
    WheelCurve,
    contour_exploration,
    disk_check,
    dual_tree,
    mass_between,
    recover_trees,
    side_check,
    visit_order_predicate,
)

BLOCKS = (
    "field_covariance",
    "metric_axioms",
    "tree_axioms",
    "confluence",
    "short_hair",
    "wheel_invariants",
    "disk_checks",
    "order_theorem",
    "area_quantization",
)
_BLOCK_TAG = {name: i + 101 for i, name in enumerate(BLOCKS)}
_ROOT_MODES = (WIRED, "center")


@dataclass
class RunConfig:
    n: int = 64
    seed: int = 1
    gamma: float = 1.0
    xi: float | None = None  # None: default_xi(gamma)
    tie_eps: float = 1e-9
    field_mode: str = FieldMode.ZERO_BOUNDARY.value
    root: str | int = WIRED
    eps: tuple = (0.4, 0.2, 0.1)
    # (t, s) as fractions of the largest distance from the centre vertex
    radius_pairs: tuple = ((0.3, 0.6), (0.3, 0.8))
    checks: dict = dc_field(default_factory=lambda: {b: True for b in BLOCKS})
    covariance_n: int = 4
    covariance_samples: int = 20000
    metric_triples: int = 30
    removal_samples: int = 100
    hairy_paths: int = 50
    disk_intervals: int = 200
    nested_pairs: int = 50
    order_pairs: int = 1000
    area_pairs: int = 100
    out: str | None = None

    def __post_init__(self):
        self.eps = tuple(float(e) for e in self.eps)
        self.radius_pairs = tuple((float(t), float(s)) for t, s in self.radius_pairs)
        checks = {b: True for b in BLOCKS}
        unknown = set(self.checks) - set(BLOCKS)
        if unknown:
            raise ConfigurationError(f"unknown check blocks {sorted(unknown)}")
        checks.update({k: bool(v) for k, v in self.checks.items()})
        self.checks = checks
        self.validate()

    @property
    def xi_value(self) -> float:
        return default_xi(self.gamma) if self.xi is None else float(self.xi)

    def validate(self) -> None:
        if isinstance(self.root, str) and self.root not in _ROOT_MODES:
            raise ConfigurationError(f"root must be one of {_ROOT_MODES} or a vertex id, got {self.root!r}")
        if not all(0.0 < e <= math.sqrt(2.0) for e in self.eps):
            raise ConfigurationError(f"eps values must lie in (0, sqrt(2)], got {self.eps}")
        if not all(0.0 < t < s < 1.0 for t, s in self.radius_pairs):
            raise ConfigurationError(f"radius pairs need 0 < t < s < 1, got {self.radius_pairs}")
        counts = ("metric_triples", "removal_samples", "hairy_paths", "disk_intervals", "nested_pairs",
                  "order_pairs", "area_pairs")
        for name in counts:
            if int(getattr(self, name)) < 0:
                raise ConfigurationError(f"{name} must be >= 0")
        if self.covariance_samples < 1000:
            raise ConfigurationError("covariance_samples must be >= 1000")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eps"] = list(self.eps)
        d["radius_pairs"] = [list(p) for p in self.radius_pairs]
        d["xi"] = self.xi_value
        d.pop("out")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class PipelineState:
    config: RunConfig
    field: GridField | None = None
    measure: AreaMeasure | None = None
    metric: MetricGrid | None = None
    tree: PlanarTree | None = None
    point_tree: PlanarTree | None = None
    curve: WheelCurve | None = None
    dual: DualTree | None = None
    subtrees: dict = dc_field(default_factory=dict)

    @property
    def center_vertex(self) -> int:
        side = self.field.side
        return (side // 2) * side + side // 2

    def ensure_point_tree(self) -> PlanarTree:
        if self.point_tree is None:
            self.point_tree = build_geodesic_tree(self.metric, self.center_vertex)
        return self.point_tree


@dataclass
class RunReport:
    config: dict
    blocks: dict
    summary: dict
    timings: dict = dc_field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.summary["pass"]

    def to_dict(self, timings: bool = False) -> dict:
        d = {"config": self.config, "blocks": self.blocks, "summary": self.summary}
        if timings:
            d["timings"] = self.timings
        return d


# --- canonical JSON -------------------------------------------------------------------------


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return None if not math.isfinite(x) else float(x)
    return x


def _encode(x, indent: int) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(x[k], indent + 1)}" for k in sorted(x)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(x, list):
        if not x:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in x):
            return "[" + ", ".join(_encode(v, indent) for v in x) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent + 1) for v in x) + "\n" + end + "]"
    if isinstance(x, float):
        return fmt_float(x)
    return json.dumps(x)


def canonical_json(obj) -> str:
    """Sorted keys, 17 significant digits per float, non-finite floats as ``null``."""
    return _encode(_plain(obj), 0) + "\n"


def emit_report(report: RunReport, path) -> Path:
    path = Path(path)
    path.write_text(canonical_json(report.to_dict()))
    return path


def load_report(path) -> dict:
    return json.loads(Path(path).read_text())


# --- stages ---------------------------------------------------------------------------------


class _stage:
    """Tag errors escaping a stage with that stage's module name."""

    def __init__(self, module: str):
        self.module = module

    def __enter__(self):
        return self

    def __exit__(self, kind, exc, tb):
        if isinstance(exc, WheelLabError) and type(exc).module == "wheel_lab":
            exc.module = self.module
        return False


def build_state(config: RunConfig) -> PipelineState:
    """Field, measure, metric, tree and wheel; errors propagate tagged with their module."""
    st = PipelineState(config)
    with _stage("field"):
        st.field = sample_field(config.n, config.seed, config.field_mode)
        st.measure = area_measure(st.field, config.gamma)
    with _stage("metric"):
        st.metric = build_metric(st.field, config.xi_value, config.tie_eps)
    with _stage("tree"):
        root = st.center_vertex if config.root == "center" else config.root
        st.tree = build_geodesic_tree(st.metric, root)
        for e in config.eps:
            st.subtrees[e] = short_hair_subtree(st.tree, e)
    with _stage("wheel"):
        st.curve = contour_exploration(st.tree, st.measure)
        st.dual = dual_tree(st.tree)
    return st


def _rng(config: RunConfig, block: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([config.seed & ((1 << 64) - 1), _BLOCK_TAG[block]]))


def _block_field_covariance(st: PipelineState) -> dict:
    cfg = st.config
    mode = FieldMode(cfg.field_mode)
    if mode is FieldMode.EXPLICIT:
        mode = FieldMode.ZERO_BOUNDARY
    rep = covariance_report(mode, cfg.covariance_n, cfg.covariance_samples, cfg.seed)
    vals = st.field.values
    if st.field.mode is FieldMode.TORUS:
        invariant = bool(float(vals.sum()) == 0.0)
    else:
        invariant = bool(np.all(vals[0] == 0) and np.all(vals[-1] == 0)
                         and np.all(vals[:, 0] == 0) and np.all(vals[:, -1] == 0))
    mass = st.measure.cell_mass
    mass_ok = bool(np.all(mass > 0) and abs(float(mass.sum()) - 1.0) <= 1e-12)
    return {
        "pass": rep.max_abs_z < 4.0 and invariant and mass_ok,
        "covariance": rep.to_dict(),
        "field_invariant": invariant,
        "measure_normalized": mass_ok,
        "max_cell_mass": st.measure.max_mass,
    }


def _block_metric_axioms(st: PipelineState) -> dict:
    m = st.metric
    rng = _rng(st.config, "metric_axioms")
    k = st.config.metric_triples
    sym = tri = geo = sub = True
    worst = 0.0
    for _ in range(k):
        a, b, c = (int(x) for x in rng.choice(m.n_vertices, size=3, replace=False))
        da, db = shortest_paths(m, a).dist, shortest_paths(m, b).dist
        sym &= bool(da[b] == db[a])
        slack = da[c] - (da[b] + db[c])
        worst = max(worst, slack / da[c])
        tri &= bool(slack <= 1e-9 * da[c])
        g = geodesic(m, a, b)
        geo &= bool(g.length == da[b] and g.vertices[0] == a and g.vertices[-1] == b
                    and len(set(g.vertices)) == len(g.vertices))
        if len(g) > 2:
            i, j = sorted(int(x) for x in rng.choice(len(g), size=2, replace=False))
            seg = g.vertices[i:j + 1]
            d_seg = shortest_paths(m, seg[0]).dist[seg[-1]]
            length = sum(float(m.edge_weight[m.edge_id(u, v)]) for u, v in zip(seg, seg[1:]))
            sub &= bool(length == d_seg)
    return {
        "pass": sym and tri and geo and sub,
        "triples": k,
        "symmetric": sym,
        "triangle": tri,
        "worst_triangle_slack": max(worst, 0.0),
        "geodesic_length_matches": geo,
        "subpaths_geodesic": sub,
        "length_quantum": m.quantum,
    }


def _tree_metric_agreement(tree: PlanarTree, m: MetricGrid) -> bool:
    w = {}
    for a, b, x in zip(m.edge_u.tolist(), m.edge_v.tolist(), m.edge_weight.tolist()):
        w[(a, b)] = x
    ok = True
    for v, p in tree.edges():
        step = 0.0 if p == tree.super_root else w[(min(v, p), max(v, p))]
        ok &= bool(tree.dist[v] == tree.dist[p] + step)
    return ok


def _random_tree_path(tree: PlanarTree, rng, min_len: int):
    grid = np.arange(tree.side * tree.side)
    for _ in range(200):
        a, b = (int(x) for x in rng.choice(grid, size=2, replace=False))
        p = tree.tree_path(a, b)
        if len(p) >= min_len and tree.super_root not in p:
            return p
    return None


def _block_tree_axioms(st: PipelineState) -> dict:
    t, cfg = st.tree, st.config
    hz = verify_half_zipper(t, samples=cfg.removal_samples, seed=cfg.seed)
    agree = _tree_metric_agreement(t, st.metric)
    rng = _rng(cfg, "tree_axioms")
    both = tested = 0
    for _ in range(cfg.hairy_paths):
        p = _random_tree_path(t, rng, max(3, cfg.n // 2))
        if p is None:
            continue
        left, right = hairy_check(t, p)
        tested += 1
        both += left and right
    return {
        "pass": hz.ok and agree,
        "half_zipper": hz.to_dict(),
        "dist_matches_edges": agree,
        "hairy_paths_tested": tested,
        "hairy_both_sides_fraction": both / tested if tested else None,
    }


def crossing_oracle(tree: PlanarTree, t: float, s: float) -> set:
    """Walk every far vertex's tree path toward the root and keep its first vertex at distance >= t."""
    out = set()
    for v in np.flatnonzero(tree.dist >= s).tolist():
        path = tree.path_to_root(v)[::-1]
        out.add(next(u for u in path if tree.dist[u] >= t))
    return out


def _block_confluence(st: PipelineState) -> dict:
    pt = st.ensure_point_tree()
    z = pt.root
    dmax = float(pt.dist.max())
    sets = []
    verified = True
    for tf, sf in st.config.radius_pairs:
        cs = crossing_set(pt, z, tf * dmax, sf * dmax)
        verified &= set(cs.points) == crossing_oracle(pt, cs.t, cs.s)
        sets.append({"t": cs.t, "s": cs.s, "size": len(cs), "points": sorted(cs.points)})
    by_t = {}
    monotone = True
    for entry in sorted(sets, key=lambda e: (e["t"], e["s"])):
        prev = by_t.get(entry["t"])
        if prev is not None and entry["size"] > prev:
            monotone = False
        by_t[entry["t"]] = entry["size"]
    r = 0.1
    R = confluence_radius(st.tree, r) if st.tree.wired else None
    side = st.field.side
    agreement = compare_root_modes(st.metric, 0.125, 0).to_dict()
    return {
        "pass": verified and monotone and all(e["size"] >= 1 for e in sets),
        "center": z,
        "max_distance": dmax,
        "crossing_sets": sets,
        "oracle_match": verified,
        "monotone_in_s": monotone,
        "confluence_radius": {"r": r, "R": R},
        "root_mode_agreement": agreement,
        "grid_side": side,
    }


def component_diameter(tree: PlanarTree, comp) -> float:
    pts = tree.positions[comp]
    pts = pts[~np.isnan(pts[:, 0])]
    return float(pdist(pts).max()) if len(pts) > 1 else 0.0


def _block_short_hair(st: PipelineState) -> dict:
    t = st.tree
    rows, ok = [], True
    for e in st.config.eps:
        sub = st.subtrees[e]
        worst = max((component_diameter(t, c) for c in sub.components()), default=0.0)
        good = worst < e
        ok &= good
        rows.append({"eps": e, "core_size": len(sub), "components": len(sub.components()),
                     "max_component_diameter": worst, "ok": good})
    order = sorted(st.config.eps, reverse=True)
    nested = all(st.subtrees[a].vertices <= st.subtrees[b].vertices for a, b in zip(order, order[1:]))
    return {"pass": ok and nested, "levels": rows, "nested": nested}


def wheel_invariants(curve: WheelCurve, tree: PlanarTree, dual: DualTree) -> dict:
    cs = curve.corners
    k = len(cs)
    closed = all(cs[(i + 1) % k].vertex == c.leave and cs[(i + 1) % k].arrive == c.vertex for i, c in enumerate(cs))
    sides = {}
    for c in cs:
        sides.setdefault((min(c.vertex, c.leave), max(c.vertex, c.leave)), []).append(c.side)
    tree_edges = {(min(v, p), max(v, p)) for v, p in tree.edges()}
    twice = set(sides) == tree_edges and all(sorted(s) == [-1, 1] for s in sides.values())
    cells_once = sorted(curve.cells) == list(range(curve.n_cells))
    counts = np.bincount([c.vertex for c in cs], minlength=tree.n_vertices)
    degree = np.array([len(tree.children[v]) + (tree.parent[v] >= 0) for v in range(tree.n_vertices)])
    multiplicity = bool(np.array_equal(counts, degree))
    times = curve.times
    times_ok = bool(np.all(np.diff(times) > 0) and times[-1] == 1.0 and times[0] > 0)
    checked, sided = side_check(curve, tree)
    primal, rdual = recover_trees(curve)
    roundtrip = bool(np.array_equal(primal.parent, tree.parent))
    dual_match = bool(np.array_equal(rdual.parent, dual.parent) and rdual.edges == dual.edges)
    dual_ok = dual.n_edges == dual.n_faces - 1
    ok = closed and twice and cells_once and multiplicity and times_ok and checked == sided and roundtrip
    return {
        "pass": bool(ok and dual_match and dual_ok),
        "corners": k,
        "tree_edges": len(tree_edges),
        "closed_circuit": closed,
        "edges_twice": twice,
        "cells_once": cells_once,
        "corner_multiplicity_equals_degree": multiplicity,
        "times_increasing_to_one": times_ok,
        "side_checks": checked,
        "side_checks_ok": sided,
        "primal_roundtrip": roundtrip,
        "dual_roundtrip": dual_match,
        "dual_vertices": dual.n_faces,
        "dual_edges": dual.n_edges,
        "center_time": curve.center_time,
    }


def _block_wheel_invariants(st: PipelineState) -> dict:
    return wheel_invariants(st.curve, st.tree, st.dual)


def _block_disk_checks(st: PipelineState) -> dict:
    c = st.curve
    rng = _rng(st.config, "disk_checks")
    k = c.n_corners
    passed = 0
    chis = {}
    for _ in range(st.config.disk_intervals):
        s, length = int(rng.integers(k)), int(rng.integers(1, k))
        r = disk_check(c, s, length)
        passed += r.ok
        chis[r.euler_characteristic] = chis.get(r.euler_characteristic, 0) + 1
    full = disk_check(c, 0, k)
    nested_ok = 0
    for _ in range(st.config.nested_pairs):
        s, length = int(rng.integers(k)), int(rng.integers(1, k))
        grow_l, grow_r = int(rng.integers(0, k - length + 1)), 0
        grow_r = int(rng.integers(0, k - length - grow_l + 1))
        inner = disk_check(c, s, length)
        outer = disk_check(c, s - grow_l, length + grow_l + grow_r)
        nested_ok += set(inner.cells) <= set(outer.cells) and set(inner.vertices) <= set(outer.vertices)
    surj = len(full.cells) == c.n_cells and set(full.vertices) == set(range(st.tree.n_vertices))
    n = st.config.disk_intervals
    return {
        "pass": passed == n and nested_ok == st.config.nested_pairs and surj,
        "intervals": n,
        "intervals_ok": passed,
        "euler_histogram": {str(key): v for key, v in sorted(chis.items())},
        "nested_pairs": st.config.nested_pairs,
        "nested_ok": nested_ok,
        "full_circle_surjective": surj,
    }


def random_admissible_pairs(tree: PlanarTree, rng, count: int, vertices=None) -> tuple[list, int]:
    """Sample ``count`` vertex pairs with neither an ancestor of the other; also return rejections."""
    pool = np.arange(tree.side * tree.side) if vertices is None else np.asarray(vertices)
    pairs, rejected = [], 0
    while len(pairs) < count and rejected < 100 * count + 100:
        z, w = (int(x) for x in rng.choice(pool, size=2, replace=False))
        if tree.is_ancestor(z, w) or tree.is_ancestor(w, z):
            rejected += 1
            continue
        pairs.append((z, w))
    return pairs, rejected


def _block_order_theorem(st: PipelineState) -> dict:
    rng = _rng(st.config, "order_theorem")
    pairs, rejected = random_admissible_pairs(st.tree, rng, st.config.order_pairs)
    agree = sum(h == r for h, r in (visit_order_predicate(st.curve, st.tree, z, w) for z, w in pairs))
    return {"pass": agree == len(pairs), "pairs": len(pairs), "agree": agree, "ancestor_pairs_skipped": rejected}


def _block_area_quantization(st: PipelineState) -> dict:
    c, mu = st.curve, st.measure
    rng = _rng(st.config, "area_quantization")
    worst = 0.0
    for _ in range(st.config.area_pairs):
        a, b = sorted(rng.random(2).tolist())
        worst = max(worst, abs(mass_between(c, mu, a, b) - (b - a)))
    total = float(c.times[-1])
    return {
        "pass": worst <= mu.max_mass and abs(total - 1.0) <= 1e-12,
        "pairs": st.config.area_pairs,
        "max_deviation": worst,
        "max_cell_mass": mu.max_mass,
        "final_time": total,
        "center_time": c.center_time,
    }


_RUNNERS = {
    "field_covariance": _block_field_covariance,
    "metric_axioms": _block_metric_axioms,
    "tree_axioms": _block_tree_axioms,
    "confluence": _block_confluence,
    "short_hair": _block_short_hair,
    "wheel_invariants": _block_wheel_invariants,
    "disk_checks": _block_disk_checks,
    "order_theorem": _block_order_theorem,
    "area_quantization": _block_area_quantization,
}


def _run_block(name: str, st: PipelineState) -> tuple[dict, float]:
    t0 = time.perf_counter()
    try:
        out = _RUNNERS[name](st)
        out["pass"] = bool(out["pass"])
    except WheelLabError as exc:
        out = {"pass": False, "error": f"[{exc.module}] {type(exc).__name__}: {exc}"}
    except Exception as exc:  # isolate the block; the others still run
        out = {"pass": False, "error": f"{type(exc).__name__}: {exc}"}
    return out, time.perf_counter() - t0


def max_threads() -> int:
    raw = os.environ.get("WHEEL_LAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigurationError(f"WHEEL_LAB_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def run_checks(st: PipelineState, only=None) -> tuple[dict, dict]:
    enabled = [b for b in BLOCKS if st.config.checks[b] and (only is None or b in only)]
    if "confluence" in enabled:
        st.ensure_point_tree()  # shared state is built before any worker starts
    workers = min(max_threads(), max(len(enabled), 1))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda b: _run_block(b, st), enabled))
    else:
        results = [_run_block(b, st) for b in enabled]
    blocks = {b: r for b, (r, _) in zip(enabled, results)}
    timings = {b: dt for b, (_, dt) in zip(enabled, results)}
    return blocks, timings


def run_pipeline(config: RunConfig, only=None, write: bool = True, render_layers=None) -> RunReport:
    t0 = time.perf_counter()
    st = build_state(config)
    t_build = time.perf_counter() - t0
    blocks, timings = run_checks(st, only)
    disabled = [b for b in BLOCKS if b not in blocks]
    summary = {
        "pass": all(b["pass"] for b in blocks.values()),
        "passed": sorted(b for b, r in blocks.items() if r["pass"]),
        "failed": sorted(b for b, r in blocks.items() if not r["pass"]),
        "disabled": disabled,
    }
    timings["build"] = t_build
    report = RunReport(config.to_dict(), blocks, summary, timings)
    report.state = st
    if write and config.out:
        write_artifacts(report, st, Path(config.out), render_layers)
    report.timings["total"] = time.perf_counter() - t0
    if write and config.out:
        Path(config.out, "timings.json").write_text(canonical_json(report.timings))
    return report


def write_artifacts(report: RunReport, st: PipelineState, out: Path, layers=None) -> None:
    from .render import ALL_LAYERS, render  # imported late: Pillow is only needed for figures

    out.mkdir(parents=True, exist_ok=True)
    emit_report(report, out / "report.json")
    save_field(st.field, out / "field.csv")
    pt = st.ensure_point_tree()
    save_distances(st.metric, pt.dist, out / "distances.bin", source=pt.root)
    corner = st.field.side * st.field.side - 1
    g = geodesic(st.metric, pt.root, corner)
    (out / "geodesic.json").write_text(json.dumps(geodesic_to_json(g, st.field.side)) + "\n")
    (out / "tree.json").write_text(canonical_json(tree_to_json(st.tree)))
    (out / "curve.json").write_text(canonical_json(curve_to_json(st.curve)))
    render(st, ALL_LAYERS if layers is None else layers, out / "figure")
