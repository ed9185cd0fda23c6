import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from surfoffset.curve import circle_uv, iso_v, segment_uv
from surfoffset.errors import ConfigurationError
from surfoffset.mesh import build_uniform
from surfoffset.metrics import hausdorff_cd
from surfoffset.morphology import signed_area
from surfoffset.offset import brute_force_offset, extract_offset, face_level_segment, march, stitch
from surfoffset.pipeline import compute_offset
from surfoffset.surface import SurfaceSpec

TRI = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def test_face_level_segment_example():
    seg = face_level_segment((0, 1, 1), TRI, 0.5)
    assert sorted(map(tuple, np.round(seg, 12))) == [(0.0, 0.5), (0.5, 0.0)]


def test_face_level_segment_outside_range():
    assert face_level_segment((0.1, 0.2, 0.3), TRI, 0.5) is None
    assert face_level_segment((0.6, 0.7, 0.9), TRI, 0.5) is None


def test_face_level_segment_vertex_on_level():
    # the corner at exactly d is nudged above it, so the segment ends at that corner
    seg = face_level_segment((0.5, 1.0, 0.0), TRI, 0.5)
    assert seg is not None
    assert np.min(np.linalg.norm(seg - TRI[0], axis=1)) < 1e-10


def test_face_level_segment_root_oracle(rng):
    for _ in range(200):
        tri = rng.normal(size=(3, 2))
        v = rng.uniform(0, 1, 3)
        d = rng.uniform(v.min(), v.max())
        seg = face_level_segment(v, tri, d)
        assert seg is not None
        roots = []
        for i in range(3):
            j = (i + 1) % 3
            f = lambda t: v[i] + t * (v[j] - v[i]) - d
            if f(0) * f(1) < 0:
                t = brentq(f, 0, 1, xtol=1e-15)
                roots.append(tri[i] + t * (tri[j] - tri[i]))
        assert len(roots) == 2
        for r in roots:
            assert np.min(np.linalg.norm(seg - r, axis=1)) < 1e-10


def _grid(n=41):
    m = build_uniform(SurfaceSpec("plane", domain=(0, 1, 0, 1)), n, n)
    return m.face_vertices(), m.uv[: m.n_v]


def _loops(faces, uv, val, d):
    edges, t, seg, _ = march(faces, val, d)
    pts = uv[edges[:, 0]] + t[:, None] * (uv[edges[:, 1]] - uv[edges[:, 0]])
    return [(pts[n], c) for n, _, c in stitch(seg, len(edges))], edges, t, val


def test_march_single_loop_orientation():
    faces, uv = _grid()
    r = np.linalg.norm(uv - 0.5, axis=1)
    loops, *_ = _loops(faces, uv, r, 0.3)
    assert len(loops) == 1 and loops[0][1]
    # below-d side on the left: the disk is enclosed counterclockwise
    assert signed_area(loops[0][0]) > 0
    assert signed_area(loops[0][0]) == pytest.approx(math.pi * 0.09, rel=5e-3)


def test_stitch_annulus_two_closed_loops():
    faces, uv = _grid()
    r = np.abs(np.linalg.norm(uv - 0.5, axis=1) - 0.3)
    loops, *_ = _loops(faces, uv, r, 0.1)
    assert len(loops) == 2 and all(c for _, c in loops)
    areas = sorted(signed_area(p) for p, _ in loops)
    assert areas[0] < 0 < areas[1]


def test_open_strip_polylines():
    faces, uv = _grid()
    loops, *_ = _loops(faces, uv, np.abs(uv[:, 1] - 0.5), 0.2)
    assert len(loops) == 2 and not any(c for _, c in loops)
    for p, _ in loops:
        assert np.allclose(np.abs(p[:, 1] - 0.5), 0.2, atol=1e-12)


def test_crossings_exactly_on_level(rng):
    faces, uv = _grid(23)
    val = rng.uniform(0, 1, len(uv))
    edges, t, seg, _ = march(faces, val, 0.37)
    assert np.all((t > 0) & (t < 1))
    interp = val[edges[:, 0]] + t * (val[edges[:, 1]] - val[edges[:, 0]])
    assert np.allclose(interp, 0.37, atol=1e-14)
    # each crossing is shared by at most two segments
    assert np.bincount(seg.ravel()).max() <= 2


@pytest.fixture(scope="module")
def sphere_run():
    spec = SurfaceSpec("sphere")
    return compute_offset(spec, iso_v(spec, 0.0, 2048), 0.3, n_segments=300, grid=(61, 41))


def test_sphere_offset_two_circles(sphere_run):
    res = sphere_run.result
    assert len(res.polylines) == 2 and res.n_closed == 2
    x = res.points_xyz()
    assert np.allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-12)
    assert np.allclose(np.abs(x[:, 2]), math.sin(0.3), atol=5e-3)
    for p in res.polylines:
        assert np.all((p.sites >= 0) & (p.sites < 300))


def test_deterministic_json():
    spec = SurfaceSpec("gaussian_bump")
    c = circle_uv((0, 0), 0.4, 512)
    a = compute_offset(spec, c, 0.2, n_segments=200, grid=(41, 41)).result.to_dict()
    b = compute_offset(spec, c, 0.2, n_segments=200, grid=(41, 41)).result.to_dict()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_offset_matches_brute_force():
    spec = SurfaceSpec("plane", domain=(-1.5, 1.5, -1.5, 1.5))
    c = segment_uv((-0.5, 0.0), (0.5, 0.0), 64)
    run = compute_offset(spec, c, 0.3, n_segments=20, grid=(16, 16))
    _, xyz = brute_force_offset(run.mesh, run.sites, 0.3)
    got = run.result.sample(4000)
    h = 3.0 / 15
    # every exhaustive crossing lies near the computed curve; the reverse
    # direction only bounds the gaps between the sparse oracle points
    assert hausdorff_cd(xyz, got).hausdorff_one_directional < h / 4
    assert hausdorff_cd(got, xyz).hausdorff_one_directional < h


def test_extract_validation(sphere_run):
    with pytest.raises(ConfigurationError):
        extract_offset(sphere_run.labeled, 0.0)
    with pytest.raises(ConfigurationError):
        extract_offset(sphere_run.labeled, 0.5, cutoff=0.4)


def test_writers(sphere_run, tmp_path):
    res = sphere_run.result
    res.write_obj(tmp_path / "o.obj")
    res.write_json(tmp_path / "o.json")
    res.write_svg(tmp_path / "o.svg")
    obj = (tmp_path / "o.obj").read_text().splitlines()
    assert sum(ln.startswith("l ") for ln in obj) == 2
    doc = json.loads((tmp_path / "o.json").read_text())
    assert doc["offset_distance"] == 0.3 and len(doc["polylines"]) == 2
    assert (tmp_path / "o.svg").read_text().lstrip().startswith("<svg")
