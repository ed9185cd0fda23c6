import json
import math

import numpy as np
import pytest

from surfoffset.curve import (SiteSet, SourceCurve, brute_force_curve_distance, circle_uv, discretize,
                              iso_v, load_curve, segment_uv)
from surfoffset.errors import ConfigurationError, ResolutionError
from surfoffset.mesh import build_uniform
from surfoffset.surface import SurfaceSpec, induced_length

PLANE = SurfaceSpec("plane", domain=(-2, 2, -2, 2))


def test_source_curve_validation():
    with pytest.raises(ConfigurationError):
        SourceCurve(np.zeros((10, 2)))
    c = SourceCurve(np.vstack([circle_uv((0, 0), 1, 32).samples, [[1.0, 0.0]]]), closed=True)
    assert len(c.samples) == 32
    dup = np.repeat(segment_uv((0, 0), (1, 0), 20).samples, 2, axis=0)
    with pytest.raises(ConfigurationError):
        SourceCurve(dup).length(PLANE)


def test_unit_circle_four_sites():
    sites = discretize(circle_uv((0, 0), 1.0, 1024), 4, PLANE)
    L = sites.total_length
    assert np.allclose(sites.arc / L * 2 * math.pi, [math.pi / 4, 3 * math.pi / 4, 5 * math.pi / 4, 7 * math.pi / 4],
                       atol=1e-3)
    ang = np.arctan2(sites.uv[:, 1], sites.uv[:, 0]) % (2 * math.pi)
    assert np.allclose(np.diff(ang), math.pi / 2, atol=1e-3)


def test_identity_discretization_closed():
    c = circle_uv((0, 0), 1.0, 64)
    sites = discretize(c, 64, PLANE)
    s = c.samples
    mids = 0.5 * (s + np.roll(s, -1, axis=0))
    assert np.allclose(sites.uv, mids, atol=1e-9)


def test_open_curve_ends_and_spacing():
    c = segment_uv((-1, 0), (1, 0), 200)
    sites = discretize(c, 11, PLANE)
    assert np.allclose(sites.uv[[0, -1]], [[-1, 0], [1, 0]])
    assert np.allclose(np.diff(sites.uv[:, 0]), 0.2, atol=1e-9)
    assert sites.prev[0] == -1 and sites.next[-1] == -1


def test_great_circle_spacing():
    s = SurfaceSpec("sphere")
    sites = discretize(iso_v(s, 0.0, 4096), 200, s)
    p = sites.uv
    q = np.roll(p, -1, axis=0)
    gaps = np.array([induced_length(s, a, b) for a, b in zip(p, q)])
    assert np.allclose(gaps, 2 * math.pi / 200, rtol=1e-2)


def test_arc_positions_and_total_length(rng):
    s = SurfaceSpec("gaussian_bump")
    c = circle_uv((0.1, 0.0), 0.5, 2048)
    sites = discretize(c, 300, s)
    assert np.all(np.diff(sites.arc) > 0)
    assert sites.total_length == pytest.approx(c.length(s), rel=1e-6)
    # quasi-uniform: consecutive straight-line gaps within 2x of the mean spacing
    q = np.roll(sites.uv, -1, axis=0)
    gaps = np.array([induced_length(s, a, b) for a, b in zip(sites.uv, q)])
    assert gaps.max() < 2 * sites.mean_spacing and gaps.min() > 0.5 * sites.mean_spacing


def test_deterministic():
    s = SurfaceSpec("torus")
    c = iso_v(s, 0.5, 512)
    a, b = discretize(c, 100, s), discretize(c, 100, s)
    assert np.array_equal(a.uv, b.uv) and np.array_equal(a.arc, b.arc)


def test_too_many_sites():
    with pytest.raises(ResolutionError):
        discretize(circle_uv((0, 0), 1, 32), 100, PLANE)
    with pytest.raises(ConfigurationError):
        discretize(circle_uv((0, 0), 1, 32), 2, PLANE)


def test_concat_links():
    a = discretize(circle_uv((0, 0), 1, 64), 8, PLANE)
    b = discretize(segment_uv((0, 1.5), (1, 1.5), 64), 5, PLANE)
    s = SiteSet.concat([a, b])
    assert len(s) == 13
    assert s.prev[0] == 7 and s.next[7] == 0
    assert s.prev[8] == -1 and s.next[12] == -1 and s.next[8] == 9
    assert list(np.unique(s.curve)) == [0, 1]


def test_curve_json(tmp_path):
    spec = SurfaceSpec("sphere")
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"generator": "circle_uv", "center": [1.0, 0.2], "radius": 0.3, "samples": 128}))
    c = load_curve(p)
    assert c.closed and len(c.samples) == 128
    c2 = load_curve({"closed": False, "samples": c.samples[:20].tolist()})
    assert not c2.closed
    c3 = load_curve({"generator": "iso_v", "value": 0.0, "samples": 64}, spec)
    assert c3.closed
    with pytest.raises(ConfigurationError):
        load_curve({"generator": "spline"})


def test_brute_force_distance_plane():
    spec = SurfaceSpec("plane", domain=(0, 1, 0, 1))
    mesh = build_uniform(spec, 21, 21)
    curve = segment_uv((0.2, 0.5), (0.8, 0.5), 61)
    v = int(np.argmin(np.linalg.norm(mesh.uv[: mesh.n_v] - [0.5, 0.7], axis=1)))
    assert brute_force_curve_distance(curve, v, spec, mesh) == pytest.approx(0.2, abs=0.05)


def test_brute_force_distance_sphere_latitude():
    spec = SurfaceSpec("sphere")
    mesh = build_uniform(spec, 33, 22)
    curve = iso_v(spec, 0.0, 64)
    for v in (100, 200, 300):
        lat = abs(mesh.uv[v, 1])
        assert brute_force_curve_distance(curve, v, spec, mesh) == pytest.approx(lat, abs=0.02)
