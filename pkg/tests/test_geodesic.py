import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from surfoffset.errors import ConfigurationError
from surfoffset import geodesic as G
from surfoffset.geodesic import (build_distance_field, detect_field_inconsistency,
                                 dijkstra_path, flip_shorten, geodesic_distance,
                                 geodesic_distances, steiner_path)
from surfoffset.mesh import build_uniform
from surfoffset.surface import SurfaceSpec, evaluate


def _vid(mesh, p):
    return int(np.argmin(np.linalg.norm(mesh.uv[: mesh.n_v] - np.asarray(p), axis=1)))


@pytest.fixture(scope="module")
def plane():
    return build_uniform(SurfaceSpec("plane", domain=(0, 2, 0, 1)), 9, 5)


@pytest.fixture(scope="module")
def bump():
    return build_uniform(SurfaceSpec("gaussian_bump"), 41, 41)


def test_dijkstra_axis_path(plane):
    s, t = _vid(plane, (0, 0)), _vid(plane, (2, 0))
    p = dijkstra_path(plane, s, t)
    assert p.total_length == pytest.approx(2.0, rel=1e-12)
    assert len(p.vertices) == 9 and p.vertices[0] == s and p.vertices[-1] == t


def test_dijkstra_rejects_equal_endpoints(plane):
    with pytest.raises(ConfigurationError):
        dijkstra_path(plane, 3, 3)


def test_flat_geodesic_is_straight(plane):
    s, t = _vid(plane, (0, 0)), _vid(plane, (2, 1))
    init = dijkstra_path(plane, s, t)
    assert init.total_length > math.sqrt(5) + 1e-3
    g = flip_shorten(plane, init)
    assert g.converged
    assert g.length == pytest.approx(math.sqrt(5), abs=1e-9)
    # every traced crossing lies on the straight segment
    assert np.allclose(g.uv[:, 1], g.uv[:, 0] / 2, atol=1e-9)


def test_straight_edge_needs_no_flips(plane):
    s, t = _vid(plane, (0, 0)), _vid(plane, (0.25, 0))
    g = flip_shorten(plane, dijkstra_path(plane, s, t))
    assert g.iterations == 0 and g.length == pytest.approx(0.25, rel=1e-12)


def test_mesh_restored_after_query(bump):
    before = (bump.he_next[: bump.n_he].copy(), bump.elen[: bump.n_e].copy())
    geodesic_distance(bump, 0, bump.n_v - 1)
    assert np.array_equal(bump.he_next[: bump.n_he], before[0])
    assert np.array_equal(bump.elen[: bump.n_e], before[1])


@settings(max_examples=20)
@given(st.integers(0, 41 * 41 - 1), st.integers(0, 41 * 41 - 1))
def test_symmetry_and_bracket(bump, s, t):
    if s == t:
        return
    a = geodesic_distance(bump, s, t)
    b = geodesic_distance(bump, t, s)
    assert a == pytest.approx(b, rel=1e-9)
    x = evaluate(bump.spec, bump.uv[[s, t]])
    assert np.linalg.norm(x[0] - x[1]) <= a * (1 + 1e-12)
    assert a <= dijkstra_path(bump, s, t).total_length * (1 + 1e-12)


def test_history_monotone(bump):
    s, t = _vid(bump, (-0.9, -0.8)), _vid(bump, (0.9, 0.7))
    g = flip_shorten(bump, dijkstra_path(bump, s, t), history=True)
    assert g.converged and len(g.history) == g.iterations
    assert np.all(np.diff(g.history) <= 1e-12)
    assert g.length <= g.init_length


def test_cylinder_unrolled_formula():
    spec = SurfaceSpec("cylinder")
    m = build_uniform(spec, 129, 33)
    rng = np.random.default_rng(1)
    for _ in range(20):
        s, t = rng.integers(0, m.n_v, 2)
        if s == t:
            continue
        du = abs(m.uv[s, 0] - m.uv[t, 0])
        du = min(du, 2 * math.pi - du)
        exact = math.hypot(du, m.uv[s, 1] - m.uv[t, 1])
        # chords of the inscribed polygon shorten the u direction by at most sinc(h/2)
        assert geodesic_distance(m, int(s), int(t)) == pytest.approx(exact, rel=2e-4)


def test_plane_single_site_field(plane):
    s = _vid(plane, (0.5, 0.5))
    f = build_distance_field(plane, [s], cutoff=10.0)
    exact = np.linalg.norm(plane.uv[: plane.n_v] - plane.uv[s], axis=1)
    assert f.finalized.all()
    assert np.allclose(f.distance, exact, atol=1e-9)
    assert np.all(f.nearest == 0)


def test_two_site_bisector():
    m = build_uniform(SurfaceSpec("plane", domain=(0, 2, 0, 1)), 17, 9)
    s = [_vid(m, (0.5, 0.5)), _vid(m, (1.5, 0.5))]
    f = build_distance_field(m, s, cutoff=10.0, site_prev=[-1, -1], site_next=[-1, -1])
    u = m.uv[: m.n_v, 0]
    off = np.abs(u - 1.0) > 1e-9
    assert np.array_equal(f.nearest[off], (u[off] > 1.0).astype(int))
    d = np.minimum(*(np.linalg.norm(m.uv[: m.n_v] - m.uv[k], axis=1) for k in s))
    assert np.allclose(f.distance, d, atol=1e-9)


def test_sphere_latitude_field():
    spec = SurfaceSpec("sphere")
    m = build_uniform(spec, 81, 55)
    eq = np.flatnonzero(np.abs(m.uv[: m.n_v, 1]) < 1e-12)
    eq = eq[np.argsort(m.uv[eq, 0])]
    n = len(eq)
    f = build_distance_field(m, eq, cutoff=0.6, site_prev=(np.arange(n) - 1) % n,
                             site_next=(np.arange(n) + 1) % n)
    lat = np.abs(m.uv[: m.n_v, 1])
    ok = f.finalized & (lat > 0.1) & (lat < 0.5)
    assert ok.sum() > 100
    assert np.allclose(f.distance[ok], lat[ok], rtol=0.01)
    assert detect_field_inconsistency(m, f).size == 0


def test_detector_flags_doubled_vertex(plane):
    s = _vid(plane, (1.0, 0.5))
    f = build_distance_field(plane, [s], cutoff=10.0)
    assert detect_field_inconsistency(plane, f).size == 0
    v = _vid(plane, (1.5, 0.75))
    f.distance[v] *= 2
    bad = detect_field_inconsistency(plane, f)
    assert bad.size > 0
    for e in bad:
        assert v in (plane.he_vert[2 * e], plane.he_vert[2 * e + 1])


def test_field_validation(plane):
    with pytest.raises(ConfigurationError):
        build_distance_field(plane, [], cutoff=1.0)
    with pytest.raises(ConfigurationError):
        build_distance_field(plane, [0], cutoff=0.0)
    with pytest.raises(ConfigurationError):
        build_distance_field(plane, [0], cutoff=1.0, init="bogus")


def test_sphere_trace_on_great_circle():
    spec = SurfaceSpec("sphere")
    m = build_uniform(spec, 129, 82)
    s, t = _vid(m, (0.3, -0.6)), _vid(m, (2.2, 0.5))
    g = flip_shorten(m, dijkstra_path(m, s, t))
    x = evaluate(spec, spec.wrap(g.uv))
    normal = np.cross(x[0], x[-1])
    normal /= np.linalg.norm(normal)
    # chords of the mesh stay within the sagitta of the arc plane
    assert np.max(np.abs(x @ normal)) < 5e-3
    assert len(g.uv) > 10


def _is_edge_path(mesh, hes, s, t):
    tails, heads = mesh.he_vert[hes], mesh.he_vert[hes ^ 1]
    return tails[0] == s and heads[-1] == t and np.array_equal(heads[:-1], tails[1:])


def test_steiner_path_is_edge_path(bump):
    rng = np.random.default_rng(3)
    for s, t in rng.integers(0, bump.n_v, (20, 2)):
        if s == t:
            continue
        p = steiner_path(bump, int(s), int(t))
        assert _is_edge_path(bump, p.halfedges, s, t)
        assert len(set(p.vertices.tolist())) == len(p.vertices)
        assert geodesic_distance(bump, int(s), int(t), init="steiner") <= p.total_length * (1 + 1e-12)


def test_steiner_graph_plane_distances():
    spec = SurfaceSpec("plane", domain=(0, 1, 0, 1))
    m = build_uniform(spec, 11, 11)
    gs, gn, gw = G._steiner(m)
    assert len(gs) - 1 == m.n_v + G.STEINER_K * m.n_e
    # graph edges are straight segments in the plane
    assert np.all(gw > 0)
    s, t = _vid(m, (0, 0)), _vid(m, (1, 0.3))
    exact = math.hypot(1, 0.3)
    d = geodesic_distance(m, s, t, init="steiner")
    assert d == pytest.approx(exact, rel=1e-9)


def test_best_is_min_of_inits(bump):
    rng = np.random.default_rng(4)
    pairs = rng.integers(0, bump.n_v, (60, 2))
    dd = geodesic_distances(bump, pairs, "dijkstra")
    ds = geodesic_distances(bump, pairs, "steiner")
    db = geodesic_distances(bump, pairs, "best")
    # best includes the Dijkstra start exactly and the Steiner start among its snaps
    assert np.all(db <= dd)
    assert np.all(db <= ds * (1 + 1e-9))
    assert np.array_equal(db, geodesic_distances(bump, pairs[:, ::-1], "best"))
    assert np.all(db[pairs[:, 0] == pairs[:, 1]] == 0.0)
    s, t = (int(x) for x in pairs[0])
    assert geodesic_distance(bump, s, t) == db[0]


def test_init_validated(bump):
    with pytest.raises(ConfigurationError):
        geodesic_distances(bump, [[0, 1]], "random")
    with pytest.raises(ConfigurationError):
        steiner_path(bump, 5, 5)


def test_cylinder_short_way_round():
    # coarse anisotropic grid: the edge graph favours the long way for some pairs
    spec = SurfaceSpec("cylinder")
    m = build_uniform(spec, 25, 25)
    rng = np.random.default_rng(5)
    pairs = rng.integers(0, m.n_v, (400, 2))
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    du = np.abs(m.uv[pairs[:, 0], 0] - m.uv[pairs[:, 1], 0])
    du = np.minimum(du, 2 * math.pi - du)
    exact = np.hypot(du, m.uv[pairs[:, 0], 1] - m.uv[pairs[:, 1], 1])
    d = geodesic_distances(m, pairs, "best")
    # chord shortening bounds the error from below, never above the exact value
    assert np.all(d <= exact * (1 + 1e-9))
    assert np.all(d >= exact * math.sin(math.pi / 24) / (math.pi / 24) * (1 - 1e-9))


def test_best_path_matches_distance(bump):
    rng = np.random.default_rng(6)
    for s, t in rng.integers(0, bump.n_v, (5, 2)):
        if s == t:
            continue
        res = G.geodesic_path(bump, int(s), int(t))
        assert res.converged
        assert res.length == pytest.approx(geodesic_distance(bump, int(s), int(t)), rel=1e-12)
        assert res.length <= dijkstra_path(bump, int(s), int(t)).total_length
