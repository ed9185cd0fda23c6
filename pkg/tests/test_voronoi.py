import math

import numpy as np
import pytest

from surfoffset.curve import SiteSet, iso_v
from surfoffset.geodesic import build_distance_field
from surfoffset.mesh import build_uniform
from surfoffset.pipeline import compute_offset
from surfoffset.surface import SurfaceSpec, evaluate
from surfoffset.voronoi import KIND_NAMES, compute_voronoi, cut_triangle

TRI = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def _poly_area(p):
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _inside(p, poly, tol=1e-12):
    a = poly
    b = np.roll(poly, -1, axis=0)
    cr = (b[:, 0] - a[:, 0]) * (p[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[0] - a[:, 0])
    return bool(np.all(cr >= -tol))


def test_single_candidate_keeps_triangle():
    out = cut_triangle(TRI, [(7, (0.1, 0.2, 0.3))])
    assert len(out) == 1 and out[0][1] == 7
    assert _poly_area(out[0][0]) == pytest.approx(0.5)


def test_symmetric_split():
    out = dict((s, p) for p, s in cut_triangle(TRI, [(0, (0, 1, 1)), (1, (1, 0, 1))]))
    # d0 = x + y and d1 = 1 - x meet on 2x + y = 1
    assert _poly_area(out[0]) == pytest.approx(0.25)
    assert _poly_area(out[1]) == pytest.approx(0.25)
    for p in out[0]:
        assert 2 * p[0] + p[1] <= 1 + 1e-12


def test_identical_planes_go_to_smaller_id():
    out = cut_triangle(TRI, [(5, (0.3, 0.4, 0.5)), (2, (0.3, 0.4, 0.5))])
    assert [s for _, s in out] == [2]


def test_cut_rejects_bad_input():
    with pytest.raises(ValueError):
        cut_triangle(TRI, [])
    with pytest.raises(ValueError):
        cut_triangle(TRI, [(0, (0.0, np.inf, 1.0))])


def test_random_planes_match_sampling(rng):
    tri = np.array([[0.0, 0.0], [1.3, 0.0], [0.4, 0.9]])
    hits = total = 0
    for _ in range(20):
        d = rng.uniform(0, 1, (5, 3))
        pieces = cut_triangle(tri, [(k, tuple(d[k])) for k in range(5)])
        assert sum(_poly_area(p) for p, _ in pieces) == pytest.approx(_poly_area(tri), rel=1e-12)
        w = rng.dirichlet(np.ones(3), 1000)
        pts = w @ tri
        best = np.argmin(w @ d.T, axis=1)
        for p, b in zip(pts, best):
            owner = [s for poly, s in pieces if _inside(p, poly)]
            total += 1
            hits += b in owner
    assert hits / total >= 0.999


def _isolated_sites(mesh, uvs):
    ids = [mesh.insert_site(p) for p in uvs]
    n = len(ids)
    sites = SiteSet(np.asarray(uvs, float), np.zeros(n), False, 0.0, np.full(n, -1),
                    np.full(n, -1), np.arange(n))
    return ids, sites


def _face_areas(lm):
    x = evaluate(lm.spec, lm.spec.wrap(lm.face_uv().reshape(-1, 2))).reshape(-1, 3, 3)
    return 0.5 * np.linalg.norm(np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]), axis=1)


def _plane_voronoi(uvs, domain=(0, 1, 0, 1), grid=(21, 21)):
    m = build_uniform(SurfaceSpec("plane", domain=domain), *grid)
    ids, sites = _isolated_sites(m, uvs)
    f = build_distance_field(m, ids, 10.0, sites.prev, sites.next)
    return compute_voronoi(m, f, sites)


def test_two_sites_split_at_bisector():
    lm = _plane_voronoi([(0.5, 0.5), (1.5, 0.5)], domain=(0, 2, 0, 1), grid=(41, 21))
    a = _face_areas(lm)
    assert a.sum() == pytest.approx(2.0, rel=1e-12)
    c = lm.face_uv().mean(axis=1)
    assert np.array_equal(lm.labels, (c[:, 0] > 1).astype(int))
    assert np.bincount(lm.labels, weights=a) == pytest.approx([1.0, 1.0], rel=1e-9)


def test_four_corner_sites_quarter_cells():
    # bisectors on grid lines: every face lies wholly in one cell
    lm = _plane_voronoi([(0, 0), (1, 0), (0, 1), (1, 1)], grid=(21, 21))
    a = np.bincount(lm.labels, weights=_face_areas(lm))
    assert a == pytest.approx([0.25] * 4, rel=1e-9)


def test_pieces_are_positive_and_distances_bounded():
    lm = _plane_voronoi([(0.23, 0.31), (0.71, 0.62), (0.4, 0.9)], grid=(13, 13))
    assert np.all(_face_areas(lm) > 0)
    s = np.array([(0.23, 0.31), (0.71, 0.62), (0.4, 0.9)])
    exact = np.min(np.linalg.norm(lm.uv[:, None] - s[None], axis=-1), axis=1)
    old = np.isin(lm.kind, [0, 2])
    assert np.allclose(lm.distance[old], exact[old], atol=1e-9)
    # linear interpolation of a cone overestimates it, by at most an edge length
    assert np.all(lm.distance >= exact - 1e-12)
    assert np.all(lm.distance <= exact + 1 / 12 * math.sqrt(2))
    assert set(np.unique(lm.kind)) <= set(range(len(KIND_NAMES)))


def test_sphere_equator_strips():
    spec = SurfaceSpec("sphere")
    run = compute_offset(spec, iso_v(spec, 0.0, 4096), 0.2, n_segments=200, grid=(121, 61))
    lm = run.labeled
    a = np.bincount(lm.labels, weights=_face_areas(lm), minlength=200)
    # labeled band strips between equal latitudes are equal by symmetry
    assert np.all(a > 0)
    assert np.max(np.abs(a / a.mean() - 1)) < 0.05
    assert lm.n_original_faces < run.mesh.n_f
    assert np.all(lm.parent < run.mesh.n_f)
