"""Acceptance gate: one test per criterion, each logging a PASS/FAIL line."""
import json
import math
import time

import numpy as np
import pytest
from scipy.spatial import cKDTree

from surfoffset import bench
from surfoffset.curve import circle_uv, iso_v, load_curve, segment_uv
from surfoffset.geodesic import detect_field_inconsistency, geodesic_distance, geodesic_distances
from surfoffset.mesh import build_uniform
from surfoffset.metrics import hausdorff_cd
from surfoffset.morphology import Region, closing, opening
from surfoffset.offset import brute_force_offset
from surfoffset.pipeline import compute_offset, field_on_mesh, prepare_sites
from surfoffset.surface import _DEFAULTS, SurfaceSpec, load_surface
from surfoffset.errors import RefinementError

pytestmark = pytest.mark.acceptance

CATALOG = tuple(_DEFAULTS)


def test_01_geodesic_accuracy(acceptance):
    t0 = time.perf_counter()
    rows = bench.run_geodesic_suite(bench.GEODESIC_GRIDS, pairs=1000, seed=42)
    elapsed = time.perf_counter() - t0
    limits = {80: 0.025, 1280: 0.004, 20480: 0.0005}
    devs = {r["faces"]: r["mean_rel_dev"] for r in rows}
    ok = set(devs) == set(limits) and all(devs[f] <= limits[f] for f in limits) and elapsed <= 300
    detail = ", ".join(f"{f} faces {100 * devs.get(f, math.nan):.3f}% (<= {100 * limits[f]:g}%)"
                       for f in limits) + f"; {elapsed:.0f} s (<= 300 s)"
    assert acceptance(1, "sphere geodesic deviation", ok, detail)


def _accuracy(n, model, hd_max, cd_max, acceptance):
    case = bench.offset_case(model)
    row, run = bench.run_offset_case(case, segments=2000, seed=42, n_samples=100_000)
    ok = row["hd"] <= hd_max and row["cd"] <= cd_max and row["segments"] == 2000
    detail = (f"HD {row['hd']:.2e} (<= {hd_max:.0e}), CD {row['cd']:.2e} (<= {cd_max:.0e}), "
              f"{row['faces']} faces, {row['seconds']:.0f} s")
    return acceptance(n, f"{model} offset accuracy", ok, detail), row


def test_02_sphere_offset_accuracy(acceptance):
    ok, row = _accuracy(2, "sphere", 2e-3, 1e-3, acceptance)
    assert 45_000 <= row["faces"] <= 60_000
    assert ok


def test_03_cylinder_offset_accuracy(acceptance):
    ok, _ = _accuracy(3, "cylinder", 2e-3, 5e-5, acceptance)
    assert ok


def test_04_runtime_scaling(acceptance):
    res = bench.run_scaling_suite(segments=(500, 1000, 2000, 4000), distances=(0.1, 0.2, 0.3, 0.4))
    r2 = res["fit"]["r2"]
    t_seg = ", ".join(f"{r['segments']}:{r['seconds']:.1f}s" for r in res["segments"])
    t_d = ", ".join(f"{r['d']:g}:{r['seconds']:.1f}s" for r in res["distances"])
    ok = r2 >= 0.95 and res["monotone_in_d"]
    assert acceptance(4, "runtime scaling", ok,
                      f"R2 {r2:.3f} (>= 0.95) over [{t_seg}]; time over d [{t_d}] "
                      f"{'non-decreasing' if res['monotone_in_d'] else 'NOT monotone'}")


def _all_pair_distances(mesh, pairs):
    d = geodesic_distances(mesh, pairs, "best")
    table = {(int(a), int(b)): x for (a, b), x in zip(pairs, d)}
    return lambda a, b: 0.0 if a == b else table[(int(min(a, b)), int(max(a, b)))]


def _face_slack(mesh):
    try:
        return mesh.validate(0.0)
    except RefinementError:
        return -math.inf


def test_05_triangle_inequality(acceptance):
    rng = np.random.default_rng(42)
    worst_rel, worst_slack, lines = math.inf, math.inf, []
    for kind in CATALOG:
        spec = SurfaceSpec(kind)
        mesh = build_uniform(spec, 25, 25)
        tri = rng.integers(0, mesh.n_v, (10_000, 3))
        pairs = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [0, 2]]]), axis=1)
        pairs = np.unique(pairs[pairs[:, 0] != pairs[:, 1]], axis=0)
        dist = _all_pair_distances(mesh, pairs)
        diam = spec.diameter_estimate()
        gap = min(dist(a, b) + dist(b, c) - dist(a, c) for a, b, c in tri)
        worst_rel = min(worst_rel, gap / diam)
        # faces after build, after site insertion and after random flips
        s_build = _face_slack(mesh)
        lo = np.array([spec.usable_domain()[0], spec.usable_domain()[2]])
        hi = np.array([spec.usable_domain()[1], spec.usable_domain()[3]])
        for p in lo + rng.uniform(0, 1, (200, 2)) * (hi - lo):
            mesh.insert_site(p)
        s_insert = _face_slack(mesh)
        for e in rng.integers(0, mesh.n_e, 10_000):
            try:
                mesh.flip_edge(int(e))
            except RefinementError:
                pass
        s_flip = _face_slack(mesh)
        worst_slack = min(worst_slack, s_build, s_insert, s_flip)
        lines.append(f"{kind} {gap / diam:+.1e}")
    ok = worst_rel >= -1e-6 and worst_slack > 0
    assert acceptance(5, "triangle inequality", ok,
                      f"worst (d_ab + d_bc - d_ac)/diam {worst_rel:+.2e} (>= -1e-6), "
                      f"worst face slack {worst_slack:.2e} (> 0) over {len(CATALOG)} surfaces")


def _small_instances():
    plane = SurfaceSpec("plane", domain=(-1.5, 1.5, -1.5, 1.5))
    sphere = SurfaceSpec("sphere")
    bump = SurfaceSpec("gaussian_bump")
    return [
        ("plane", plane, segment_uv((-0.5, 0.0), (0.5, 0.0), 512), 0.3, 40, (21, 21)),
        ("sphere", sphere, iso_v(sphere, 0.0, 2048), 0.3, 64, (31, 17)),
        ("gaussian_bump", bump, circle_uv((0.0, 0.0), 0.4, 1024), 0.25, 48, (25, 25)),
    ]


def test_06_offset_in_voronoi_cell(acceptance):
    checked = skipped = wrong = 0
    sizes = []
    for name, spec, curve, d, n, grid in _small_instances():
        run = compute_offset(spec, curve, d, n_segments=n, grid=grid)
        mesh, fld = run.mesh, run.field
        sizes.append((name, mesh.n_f, len(run.sites)))
        assert mesh.n_f <= 2000 and len(run.sites) <= 64
        pts, labels = [], []
        for pl in run.result.polylines:
            pts.append(pl.uv)
            labels.append(pl.sites)
        pts, labels = np.vstack(pts), np.concatenate(labels)
        loc = [mesh.locate(p) for p in pts]
        fv = np.array([mesh.face_vertices(f) for f, _ in loc])
        bary = np.array([b for _, b in loc])
        verts = np.unique(fv)
        ns = len(run.sites)
        D = fld.pair_distances(mesh, np.repeat(verts, ns), np.tile(np.arange(ns), len(verts)))
        D = D.reshape(len(verts), ns)
        row = np.searchsorted(verts, fv)
        val = np.einsum("pk,pks->ps", bary, D[row])
        best = np.argmin(val, axis=1)
        srt = np.sort(val, axis=1)
        # a value gap of g puts the point about g / 2 from the bisector
        near = (srt[:, 1] - srt[:, 0]) < 2e-3 * run.sites.mean_spacing
        skipped += int(near.sum())
        checked += int((~near).sum())
        wrong += int(np.sum((best != labels) & ~near))
    ok = wrong == 0 and checked > 0
    inst = ", ".join(f"{nm} {f} faces/{s} sites" for nm, f, s in sizes)
    assert acceptance(6, "offset vertices in their Voronoi cell", ok,
                      f"{wrong} mislabelled of {checked} checked ({skipped} near bisectors skipped); {inst}")


def test_07_brute_force_oracle(acceptance):
    worst, lines = 0.0, []
    sizes = {"plane": (20, (16, 16)), "sphere": (32, (21, 12)), "gaussian_bump": (24, (17, 17))}
    for name, spec, curve, d, _, _ in _small_instances():
        n, grid = sizes[name]
        run = compute_offset(spec, curve, d, n_segments=n, grid=grid)
        _, ref = brute_force_offset(run.mesh, run.sites, d)
        got = run.result.sample(20_000)
        hd = max(hausdorff_cd(got, ref).hausdorff_one_directional,
                 hausdorff_cd(ref, got).hausdorff_one_directional)
        h = run.mesh.mean_edge_length()
        worst = max(worst, hd / h)
        lines.append(f"{name} HD {hd:.3g} = {hd / h:.2f} h")
    assert acceptance(7, "brute-force oracle equivalence", worst <= 2.0,
                      "; ".join(lines) + " (<= 2 h, h = mean edge length)")


def test_08_lipschitz_certification(acceptance, configs):
    doc = json.loads((configs / "examples.json").read_text())

    def violations(entry):
        spec = load_surface(configs / entry["surface"])
        curves = [load_curve(configs / c, spec) for c in entry["curves"]]
        mesh, sites, ids = prepare_sites(spec, curves, entry["segments"], tuple(entry["grid"]))
        fld, _ = field_on_mesh(mesh, sites, ids, entry["distance"], init=entry["init"])
        return len(detect_field_inconsistency(mesh, fld))

    clean = {e["name"]: violations(e) for e in doc["runs"]}
    stress = violations(doc["stress"])
    ok = all(v == 0 for v in clean.values()) and stress > 0
    detail = ", ".join(f"{k} {v}" for k, v in clean.items())
    assert acceptance(8, "1-Lipschitz certification", ok,
                      f"violating edges: {detail} (all 0); stress {doc['stress']['name']} {stress} (> 0)")


def test_09_flat_plane(acceptance, configs):
    spec = load_surface(configs / "plane.json")
    curve = load_curve(configs / "segment.json", spec)
    d, n = 0.3, 400
    run = compute_offset(spec, curve, d, n_segments=n, grid=(61, 61))
    a, b = np.array([-0.5, 0.0]), np.array([0.5, 0.0])

    def seg_dist(p):
        t = np.clip((p - a) @ (b - a) / ((b - a) @ (b - a)), 0, 1)
        return np.linalg.norm(p - (a + t[:, None] * (b - a)), axis=1)

    spacing = run.sites.mean_spacing
    pts = np.vstack([pl.uv for pl in run.result.polylines])
    err_out = float(np.max(np.abs(seg_dist(pts) - d)))
    # analytic stadium sampled densely, against the computed polylines
    t = np.linspace(0, 1, 2000)
    th = np.linspace(-math.pi / 2, math.pi / 2, 2000)
    stadium = np.vstack([np.stack([-0.5 + t, np.full_like(t, d)], 1),
                         np.stack([-0.5 + t, np.full_like(t, -d)], 1),
                         np.stack([0.5 + d * np.cos(th), d * np.sin(th)], 1),
                         np.stack([-0.5 - d * np.cos(th), d * np.sin(th)], 1)])
    err_in = float(np.max(cKDTree(run.result.sample(200_000)[:, :2]).query(stadium)[0]))
    closed = run.result.n_closed == len(run.result.polylines) == 1
    mesh = build_uniform(spec, 61, 61)
    rng = np.random.default_rng(42)
    geo_err = 0.0
    for _ in range(1000):
        s, q = (int(k) for k in rng.integers(0, mesh.n_v, 2))
        if s != q:
            geo_err = max(geo_err, abs(geodesic_distance(mesh, s, q)
                                       - float(np.linalg.norm(mesh.uv[s] - mesh.uv[q]))))
    ok = closed and max(err_out, err_in) <= 1.5 * spacing and geo_err <= 1e-9
    assert acceptance(9, "flat-plane degeneracy", ok,
                      f"stadium error {max(err_out, err_in):.2e} (<= 1.5 x spacing = {1.5 * spacing:.2e}), "
                      f"one closed loop {closed}, max |geodesic - euclidean| {geo_err:.1e} (<= 1e-9)")


def test_10_morphology(acceptance, configs):
    spec = load_surface(configs / "plane.json")
    region = Region([load_curve(configs / c, spec) for c in ("disk.json", "hole.json", "blob.json")],
                    spec)
    d = 0.15
    kw = dict(n_segments=1000, grid=(121, 121))
    op, cl = opening(region, d, **kw), closing(region, d, **kw)
    hole_c, blob_c = np.array([[0.2, 0.0]]), np.array([[1.0, 0.0]])
    hole_filled = len(cl) < len(region) and bool(cl.classify(hole_c)[0])
    blob_removed = len(op) < len(region) and not bool(op.classify(blob_c)[0])
    assert not region.classify(hole_c)[0] and region.classify(blob_c)[0]
    rng = np.random.default_rng(42)
    pts = np.column_stack([rng.uniform(-1.0, 1.4, 10_000), rng.uniform(-1.0, 1.0, 10_000)])
    tol = 2 * build_uniform(spec, *kw["grid"]).mean_edge_length()
    bnd = np.vstack([c.samples for r in (region, op, cl) for c in r.loops])
    far = cKDTree(bnd).query(pts)[0] > tol
    r_in, o_in, c_in = region.classify(pts), op.classify(pts), cl.classify(pts)
    bad = int(np.sum(far & ((o_in & ~r_in) | (r_in & ~c_in))))
    ok = hole_filled and blob_removed and bad == 0
    assert acceptance(10, "morphology", ok,
                      f"closing loops {len(region)} -> {len(cl)} (hole filled {hole_filled}), "
                      f"opening loops {len(region)} -> {len(op)} (blob removed {blob_removed}), "
                      f"{bad} inclusion violations at {int(far.sum())} of 10000 points beyond {tol:.3f}")
