import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import instance
from oracles import brute_force_geodesic, simple_paths
from wheel_lab.errors import AmbiguityError, DegeneratePathError, ParameterError, VertexIndexError
from wheel_lab.field import GridField, sample_field
from wheel_lab.metric import (
    build_metric,
    default_xi,
    dijkstra,
    distance,
    geodesic,
    metric_ball,
    shortest_paths,
)

DATA = Path(__file__).resolve().parent / "data"
CHECKER = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)


def test_zero_field_unit_weights():
    m = build_metric(GridField.zeros(8), 0.4, tie_eps=0.0)
    assert np.all(m.edge_weight == 1.0 / 8)


def test_jitter_contract():
    m = build_metric(GridField.zeros(16), 0.4, tie_eps=1e-9)
    d = 1.0 / 16
    assert np.all(m.edge_weight >= d) and np.all(m.edge_weight < d * (1 + 1e-9))
    assert len(np.unique(m.edge_weight)) == m.n_edges
    assert np.all((m.tie_jitter >= 0) & (m.tie_jitter < 1e-9))


def test_jitter_depends_only_on_seed():
    a = build_metric(GridField.zeros(8), 0.4, seed=5)
    b = build_metric(GridField.zeros(8), 0.4, seed=5)
    c = build_metric(GridField.zeros(8), 0.4, seed=6)
    assert np.array_equal(a.tie_jitter, b.tie_jitter)
    assert not np.array_equal(a.tie_jitter, c.tie_jitter)


def test_weight_formula():
    f = sample_field(8, 3)
    m = build_metric(f, 0.3, tie_eps=0.0)
    vw = f.spacing * np.exp(0.3 * f.values)
    assert np.allclose(m.vertex_weight, vw, rtol=1e-15)
    w = (vw.ravel()[m.edge_u] + vw.ravel()[m.edge_v]) / 2
    assert np.allclose(m.edge_weight, w, rtol=1e-14, atol=0)


def test_default_xi_calibration():
    assert default_xi(math.sqrt(8.0 / 3.0)) == pytest.approx(0.4082, abs=5e-5)
    assert default_xi(math.sqrt(8.0 / 3.0)) == pytest.approx(math.sqrt(8.0 / 3.0) / 4.0, rel=1e-12)


@pytest.mark.parametrize("xi", [0.0, -0.1])
def test_nonpositive_xi_rejected(xi):
    with pytest.raises(ParameterError):
        build_metric(GridField.zeros(4), xi)


def test_tie_eps_range():
    with pytest.raises(ParameterError):
        build_metric(GridField.zeros(4), 0.4, tie_eps=1e-6)


def test_distance_to_self_is_zero():
    m = build_metric(sample_field(8, 1), 0.4)
    assert distance(m, 17, 17) == 0.0


def test_zero_field_distance_is_scaled_graph_distance():
    m = build_metric(GridField.zeros(6), 0.4, tie_eps=0.0)
    side = m.side
    for a, b in [(0, 48), (3, 10), (7, 7), (0, 6)]:
        ra, ca = divmod(a, side)
        rb, cb = divmod(b, side)
        assert distance(m, a, b) == pytest.approx((abs(ra - rb) + abs(ca - cb)) / 6, rel=1e-15)


def test_checkerboard_distance_matches_enumeration():
    m = build_metric(GridField.from_vertex_values(CHECKER), 0.5, tie_eps=0.0)
    length, _ = brute_force_geodesic(CHECKER, 0.5, 0, 8)
    assert distance(m, 0, 8) == pytest.approx(length, rel=1e-12)
    assert len(list(simple_paths(3, 0, 8))) == 12


def test_invalid_vertex():
    m = build_metric(GridField.zeros(2), 0.4)
    for bad in (-1, 9, 2.0):
        with pytest.raises(IndexError):
            distance(m, 0, bad)
    with pytest.raises(VertexIndexError):
        m.vertex_id(3, 0)


def test_ball_edge_cases():
    m = build_metric(GridField.zeros(4), 0.4)
    assert metric_ball(m, 6, 0.0) == set()
    assert metric_ball(m, 6, 1.0 / 8) == {6}
    with pytest.raises(ParameterError):
        metric_ball(m, 6, -1.0)


def test_ball_contains_median_vertex():
    m = build_metric(GridField.from_vertex_values(CHECKER), 0.5, tie_eps=0.0)
    d = {w: brute_force_geodesic(CHECKER, 0.5, 0, w)[0] for w in range(1, 9)}
    order = sorted(d, key=d.get)
    w_star = order[len(order) // 2]
    assert w_star in metric_ball(m, 0, d[w_star] + 1e-12)
    assert w_star not in metric_ball(m, 0, d[w_star] * (1 - 1e-9))


def test_ball_is_monotone():
    m = build_metric(sample_field(16, 4), 0.4)
    prev = set()
    for t in np.linspace(0, 0.6, 13):
        ball = metric_ball(m, 100, float(t))
        assert prev <= ball
        prev = ball


def test_geodesic_contract():
    m = build_metric(sample_field(16, 2), 0.4)
    g = geodesic(m, 5, 200)
    assert g.vertices[0] == 5 and g.vertices[-1] == 200
    assert g.length == distance(m, 5, 200)
    rev = geodesic(m, 200, 5)
    assert rev.vertices == g.vertices[::-1]


def test_geodesic_errors():
    m = build_metric(GridField.zeros(4), 0.4, tie_eps=0.0)
    with pytest.raises(DegeneratePathError):
        geodesic(m, 3, 3)
    assert geodesic(m, 0, 1).vertices == (0, 1)
    with pytest.raises(AmbiguityError, match="tie_eps"):
        geodesic(m, 0, m.n_vertices - 1)


def test_checkerboard_geodesic_matches_enumeration():
    m = build_metric(GridField.from_vertex_values(CHECKER), 0.5, tie_eps=0.0)
    _, path = brute_force_geodesic(CHECKER, 0.5, 1, 7)
    assert geodesic(m, 1, 7).vertices == path


def test_corpus_has_no_near_ties():
    """Path identity in the frozen corpus is only meaningful if the runner-up is clearly longer."""
    data = json.loads((DATA / "metric_corpus.json").read_text())
    for entry in data["fields"]:
        vals = np.array(entry["values"])
        for p in entry["pairs"][::5]:
            best = p["length"]
            lengths = []
            for path in simple_paths(3, p["a"], p["b"]):
                delta = 0.5
                lengths.append(sum(delta * (math.exp(0.5 * vals.flat[u]) + math.exp(0.5 * vals.flat[v])) / 2
                                   for u, v in zip(path, path[1:])))
            runner_up = sorted(lengths)[1] if len(lengths) > 1 else math.inf
            assert runner_up - best > 1e-9 * best


def test_corpus_regenerates_identically():
    import importlib.util

    loader_spec = importlib.util.spec_from_file_location("make_corpus", DATA / "make_metric_corpus.py")
    mod = importlib.util.module_from_spec(loader_spec)
    loader_spec.loader.exec_module(mod)
    assert mod.build() == json.loads((DATA / "metric_corpus.json").read_text())


def test_metric_axioms_on_64_grid():
    _, m, _, _, _ = instance(64, 1)
    rng = np.random.default_rng(0)
    cache = {}

    def dist_from(v):
        if v not in cache:
            cache[v] = shortest_paths(m, v).dist
        return cache[v]

    for _ in range(100):
        a, b, c = (int(x) for x in rng.choice(m.n_vertices, 3, replace=False))
        dab, dbc, dac = dist_from(a)[b], dist_from(b)[c], dist_from(a)[c]
        assert dab == dist_from(b)[a]
        assert dac <= (dab + dbc) * (1 + 1e-9)
        assert distance(m, a, b) == distance(m, b, a) == dab


def test_geodesic_length_equals_distance_and_subpaths():
    _, m, _, _, _ = instance(64, 2)
    rng = np.random.default_rng(1)
    sub_checked = 0
    for _ in range(100):
        a, b = (int(x) for x in rng.choice(m.n_vertices, 2, replace=False))
        g = geodesic(m, a, b)
        assert g.length == distance(m, a, b)
        assert len(set(g.vertices)) == len(g.vertices)
        steps = [abs(u - v) for u, v in zip(g.vertices, g.vertices[1:])]
        assert set(steps) <= {1, m.side}
        if sub_checked < 50 and len(g) > 3:
            i, j = sorted(int(x) for x in rng.choice(len(g), 2, replace=False))
            seg = g.vertices[i:j + 1]
            length = sum(float(m.edge_weight[m.edge_id(u, v)]) for u, v in zip(seg, seg[1:]))
            assert length == distance(m, seg[0], seg[-1])
            sub_checked += 1
    assert sub_checked == 50


def test_zero_field_paths_unique_with_jitter():
    m = build_metric(GridField.zeros(32), 0.4, tie_eps=1e-9)
    for src in range(0, m.n_vertices, 97):
        sp = shortest_paths(m, src)
        assert not sp.tied.any()
    assert geodesic(m, 0, m.n_vertices - 1).length > 0


def test_multi_source_dijkstra_matches_min_over_sources():
    m = build_metric(sample_field(8, 5), 0.4)
    sources = [0, 40, 80]
    multi = dijkstra(m.adjacency, m.n_vertices, sources).dist
    single = np.min([shortest_paths(m, s).dist for s in sources], axis=0)
    assert np.array_equal(multi, single)


def test_scipy_dijkstra_agrees_exactly():
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import dijkstra as sp_dijkstra

    m = build_metric(sample_field(32, 8), default_xi(1.0))
    g = coo_matrix((m.edge_weight, (m.edge_u, m.edge_v)), shape=(m.n_vertices,) * 2)
    ref = sp_dijkstra(g, directed=False, indices=123)
    assert np.array_equal(shortest_paths(m, 123).dist, ref)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(2, 10), xi=st.floats(0.05, 1.0))
def test_metric_properties_random(seed, n, xi):
    m = build_metric(sample_field(n, seed), xi)
    rng = np.random.default_rng(seed)
    a, b, c = (int(x) for x in rng.integers(m.n_vertices, size=3))
    assert distance(m, a, b) == distance(m, b, a) >= 0
    assert distance(m, a, c) <= (distance(m, a, b) + distance(m, b, c)) * (1 + 1e-9)
    assert np.all(m.vertex_weight > 0) and np.all(np.isfinite(m.vertex_weight))
    assert np.all(m.edge_weight > 0)
