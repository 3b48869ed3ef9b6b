import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SEEDS, instance
from oracles import UnionFind, dfs_leaf_order, kite_census, small_tree_corpus
from wheel_lab.errors import (
    DecodeError,
    DegenerateMergeError,
    EmbeddingError,
    InputError,
    ParameterError,
    StructuralError,
)
from wheel_lab.field import GridField, area_measure, area_measure_from_heights
from wheel_lab.metric import build_metric
from wheel_lab.planar import grid_map
from wheel_lab.tree import WIRED, PlanarTree, build_geodesic_tree, tree_from_children
from wheel_lab.wheel import (
    area_parametrization,
    contour_exploration,
    disk_check,
    dual_tree,
    kite_complex,
    mass_between,
    recover_trees,
    side_check,
    visit_order_predicate,
)

STAR = [[1, 2, 3], [], [], []]


def first_visits(curve):
    seen = []
    for c in curve.corners:
        if c.vertex not in seen:
            seen.append(c.vertex)
    return seen


def test_single_edge_tree():
    t = tree_from_children([[1], []])
    c = contour_exploration(t)
    assert [(s.vertex, s.leave, s.side) for s in c.corners] == [(0, 1, 1), (1, 0, -1)]
    primal, dual = recover_trees(c)
    assert primal.parent.tolist() == [-1, 0]
    assert dual.n_faces == 1 and dual.n_edges == 0


def test_star_visits_children_clockwise():
    c = contour_exploration(tree_from_children(STAR))
    assert first_visits(c) == [0, 1, 2, 3]


def test_bare_root_has_no_contour():
    with pytest.raises(EmbeddingError):
        contour_exploration(tree_from_children([[]]))


def test_counts_on_16_grid():
    _, _, t, _, c = instance(16, 1)
    assert c.n_corners == 2 * t.n_edges == 2 * (17 * 17)
    assert len(c.cells) == 16 * 16 == c.n_cells
    assert c.n_kites == len(grid_map(17, True).angle_face)


@pytest.mark.parametrize("root", [WIRED, "center"])
def test_unique_preimage(root):
    _, _, t, _, c = instance(16, 2, root)
    counts = np.bincount([s.vertex for s in c.corners], minlength=t.n_vertices)
    degree = [len(t.children[v]) + (t.parent[v] >= 0) for v in range(t.n_vertices)]
    assert counts.tolist() == degree
    assert sorted(c.cells) == list(range(c.n_cells))
    assert len(set(c.cells)) == len(c.cells)


def test_contour_matches_dfs_leaf_order_on_corpus():
    for children in small_tree_corpus(max_edges=6):
        c = contour_exploration(tree_from_children(children))
        leaf_corners = [s.vertex for s in c.corners if s.arrive == s.leave and s.vertex != 0]
        assert leaf_corners == dfs_leaf_order(children)


def test_inconsistent_rotation_rejected():
    _, _, t, _, _ = instance(8, 1, "center")
    v = next(v for v in range(t.side**2) if len(t.children[v]) >= 2)
    kids = list(t.children)
    kids[v] = tuple(reversed(kids[v]))
    swapped = PlanarTree(t.parent, tuple(kids), t.root, t.positions, t.dist, t.side, t.wired)
    with pytest.raises(EmbeddingError):
        contour_exploration(swapped)


def test_dual_on_single_cell():
    m = build_metric(GridField.zeros(1), 0.4)
    t = build_geodesic_tree(m, 0)
    assert t.n_edges == 3
    d = dual_tree(t)
    assert d.n_faces == 2 and d.n_cells == 1
    assert d.n_edges == 1
    f, g, _ = d.edges[0]
    assert {f, g} == {0, 1}


@pytest.mark.parametrize("root", [WIRED, "center"])
def test_dual_is_spanning_tree_union_find(root):
    _, _, t, _, _ = instance(32, 3, root)
    d = dual_tree(t)
    assert d.n_edges == d.n_faces - 1
    uf = UnionFind(d.n_faces)
    for f, g, _ in d.edges:
        assert uf.union(f, g), "cycle in dual tree"
    assert len({uf.find(x) for x in range(d.n_faces)}) == 1
    pm = grid_map(t.side, t.wired)
    tree_edges = {frozenset(e) for e in t.edges()}
    non_tree = {frozenset(e) for e in pm.edges} - tree_edges
    assert {frozenset(e) for _, _, e in d.edges} == non_tree


def test_dual_rejects_non_spanning_tree():
    _, _, t, _, _ = instance(8, 1)
    leaf = next(v for v in range(t.side**2) if not t.children[v])
    parent = t.parent.copy()
    parent[leaf] = -1
    kids = tuple(tuple(c for c in ks if c != leaf) for ks in t.children)
    broken = PlanarTree(parent, kids, t.root, t.positions, t.dist, t.side, t.wired)
    with pytest.raises(StructuralError):
        dual_tree(broken)


def test_disk_full_circle():
    _, _, t, _, c = instance(16, 1)
    rep = disk_check(c, 5, c.n_corners)
    assert rep.full_circle and rep.endpoints_on_boundary
    assert rep.cells == tuple(range(c.n_cells))
    assert set(rep.vertices) == set(range(t.n_vertices))
    assert rep.euler_characteristic == 2


def test_disk_single_corner():
    _, _, _, _, c = instance(16, 1)
    k = next(i for i, s in enumerate(c.corners) if len(s.faces) == 1 and s.faces[0] < c.n_cells)
    rep = disk_check(c, k, 1)
    assert len(rep.cells) == 1
    assert rep.euler_characteristic == 1
    assert rep.endpoints_on_boundary


def test_disk_errors():
    _, _, _, _, c = instance(8, 1)
    with pytest.raises(ParameterError):
        disk_check(c, 0, 0)
    with pytest.raises(ParameterError):
        disk_check(c, 0, c.n_corners + 1)


def test_disk_census_oracle_on_32_grid():
    _, _, _, _, c = instance(32, 4)
    rng = np.random.default_rng(0)
    k = c.n_corners
    for _ in range(200):
        s, length = int(rng.integers(k)), int(rng.integers(1, k))
        rep = disk_check(c, s, length)
        pts, segs, kites = kite_census([c.corners[(s + j) % k] for j in range(length)])
        assert rep.euler_characteristic == pts - segs + kites == 1
        assert rep.simply_connected and rep.endpoints_on_boundary


def test_whole_sphere_census():
    _, _, _, _, c = instance(8, 2)
    pts, segs, kites = kite_census(c.corners)
    assert pts - segs + kites == 2
    kp, ks = kite_complex(c)
    assert kites == len(kp) and pts == len(np.unique(kp)) and segs == len(np.unique(ks))


def test_interval_monotonicity():
    _, _, _, _, c = instance(32, 5)
    rng = np.random.default_rng(4)
    k = c.n_corners
    for _ in range(50):
        s, length = int(rng.integers(k)), int(rng.integers(1, k // 2))
        extra = int(rng.integers(1, k - length))
        left = int(rng.integers(0, extra + 1))
        inner, outer = disk_check(c, s, length), disk_check(c, s - left, length + extra)
        assert set(inner.cells) <= set(outer.cells)
        assert set(inner.vertices) <= set(outer.vertices)
        assert set(inner.visited_cells) <= set(outer.visited_cells)


def test_cells_visited_inside_interval_are_covered():
    _, _, _, _, c = instance(16, 3)
    rep = disk_check(c, 40, 300)
    assert set(rep.visited_cells) <= set(rep.cells)


@pytest.mark.parametrize("root", [WIRED, "center"])
def test_zipper_sides(root):
    _, _, t, _, c = instance(32, 1, root)
    checked, ok = side_check(c, t)
    assert checked > 2 * 32 * 32
    assert ok == checked


def test_uniform_times():
    _, _, _, _, c = instance(8, 1)
    plain = contour_exploration(instance(8, 1)[2])
    assert np.array_equal(plain.times, np.arange(1, 65) / 64)
    mu = area_measure(GridField.zeros(8), 1.0)
    assert np.array_equal(area_parametrization(plain, mu).times, np.arange(1, 65) / 64)
    assert c.times[-1] == 1.0


def test_center_anchor():
    _, _, _, _, c = instance(16, 1)
    center = 8 * 16 + 8
    i = c.cells.index(center)
    assert c.times_centered[i] == 0.0
    assert np.array_equal(c.times_centered, c.times - c.times[i])


def test_area_direct_summation():
    _, _, _, mu, c = instance(32, 2)
    rng = np.random.default_rng(8)
    mass = mu.cell_mass.ravel()
    for _ in range(100):
        a, b = sorted(rng.random(2))
        direct = sum(mass[cell] for cell, t in zip(c.cells, c.times) if a <= t <= b)
        assert mass_between(c, mu, a, b) == pytest.approx(direct, abs=1e-15)
        assert abs(direct - (b - a)) <= mu.max_mass


def test_area_grid_mismatch():
    _, _, _, _, c = instance(8, 1)
    with pytest.raises(InputError):
        area_parametrization(c, area_measure(GridField.zeros(4), 1.0))


def test_times_strictly_increasing():
    _, _, _, _, c = instance(32, 3)
    assert np.all(np.diff(c.times) > 0) and c.times[0] > 0


def test_star_order_predicate():
    t = tree_from_children(STAR)
    c = contour_exploration(t)
    assert visit_order_predicate(c, t, 1, 2) == (True, True)
    assert visit_order_predicate(c, t, 2, 1) == (False, False)
    assert visit_order_predicate(c, t, 3, 1) == (False, False)


def test_order_predicate_errors():
    t = tree_from_children([[1, 2], [3], [], []])
    c = contour_exploration(t)
    with pytest.raises(ParameterError):
        visit_order_predicate(c, t, 2, 2)
    with pytest.raises(DegenerateMergeError):
        visit_order_predicate(c, t, 1, 3)
    with pytest.raises(DegenerateMergeError):
        visit_order_predicate(c, t, 0, 2)


def test_order_theorem_on_grid():
    for seed in SEEDS[:2]:
        _, _, t, _, c = instance(32, seed)
        rng = np.random.default_rng(seed)
        done = 0
        while done < 300:
            z, w = (int(x) for x in rng.choice(t.side**2, 2, replace=False))
            if t.is_ancestor(z, w) or t.is_ancestor(w, z):
                continue
            hit, right = visit_order_predicate(c, t, z, w)
            assert hit == right
            assert visit_order_predicate(c, t, w, z) == (not hit, not right)
            done += 1


def test_roundtrip_grid_and_independent_dual():
    for root in (WIRED, "center"):
        _, _, t, _, c = instance(32, 2, root)
        primal, dual = recover_trees(c)
        assert np.array_equal(primal.parent, t.parent)
        assert primal.children == t.children
        ref = dual_tree(t)
        assert dual.edges == ref.edges and np.array_equal(dual.parent, ref.parent)
        assert dual.root == ref.root


def test_corrupted_word_rejected():
    _, _, _, _, c = instance(8, 1)
    corners = list(c.corners)
    corners[5], corners[6] = corners[6], corners[5]
    with pytest.raises(DecodeError):
        recover_trees(dataclasses.replace(c, corners=tuple(corners)))
    bad = list(c.corners)
    bad[3] = dataclasses.replace(bad[3], side=-bad[3].side)
    with pytest.raises(DecodeError):
        recover_trees(dataclasses.replace(c, corners=tuple(bad)))


def test_curve_to_dict_shapes():
    _, _, _, _, c = instance(4, 1)
    d = c.to_dict()
    assert len(d["corners"]) == c.n_corners and len(d["cells"]) == 16
    assert d["times"][-1] == 1.0


def test_explicit_measure_heights():
    t = instance(2, 1)[2]
    c = contour_exploration(t)
    mu = area_measure_from_heights(np.zeros((2, 2)), 1.0)
    assert area_parametrization(c, mu).times.tolist() == [0.25, 0.5, 0.75, 1.0]


@st.composite
def plane_trees(draw):
    n = draw(st.integers(2, 40))
    children = [[] for _ in range(n)]
    for v in range(1, n):
        p = draw(st.integers(0, v - 1))
        pos = draw(st.integers(0, len(children[p])))
        children[p].insert(pos, v)
    return children


@settings(max_examples=60, deadline=None)
@given(plane_trees())
def test_random_plane_tree_roundtrip_and_order(children):
    t = tree_from_children(children)
    c = contour_exploration(t)
    assert c.n_corners == 2 * (len(children) - 1)
    primal, _ = recover_trees(c)
    assert primal.children == t.children
    lv = [v for v in range(len(children)) if not children[v]]
    for z in lv[:6]:
        for w in lv[:6]:
            if z != w:
                hit, right = visit_order_predicate(c, t, z, w)
                assert hit == right


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(2, 12), wired=st.booleans())
def test_random_grid_wheels(seed, n, wired):
    from wheel_lab.field import sample_field
    from wheel_lab.metric import default_xi

    f = sample_field(n, seed)
    m = build_metric(f, default_xi(1.0))
    t = build_geodesic_tree(m, WIRED if wired else seed % m.n_vertices)
    c = contour_exploration(t, area_measure(f, 1.0))
    checked, ok = side_check(c, t)
    assert ok == checked
    primal, dual = recover_trees(c)
    assert np.array_equal(primal.parent, t.parent)
    assert dual.n_edges == dual.n_faces - 1
    rng = np.random.default_rng(seed)
    for _ in range(10):
        s, length = int(rng.integers(c.n_corners)), int(rng.integers(1, c.n_corners))
        assert disk_check(c, s, length).ok
