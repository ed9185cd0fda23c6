"""Accuracy, geodesic-deviation and runtime-scaling experiments.

Every suite returns plain dict rows so reports can be written as CSV and
JSON without conversion.  Offset rows follow :data:`CSV_FIELDS`.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .curve import iso_v
from .geodesic import geodesic_distances
from .mesh import build_uniform
from .metrics import hausdorff_cd
from .pipeline import compute_offset
from .surface import SurfaceSpec, evaluate

log = logging.getLogger(__name__)

CSV_FIELDS = ["suite", "model", "segments", "faces", "d", "hd", "cd", "seconds",
              "phase_field", "phase_voronoi", "phase_extract"]

N_SAMPLES = 100_000
SPHERE_GRID = (201, 127)        # about 50k faces with both pole caps
CYLINDER_GRID = (501, 41)       # fine across the source circle, coarse along the axis
GEODESIC_GRIDS = ((11, 6), (33, 22), (129, 82))     # 80, 1280 and 20480 faces


@dataclass
class OffsetCase:
    """An offset experiment with a closed-form reference offset."""
    model: str
    spec: SurfaceSpec
    curve: object
    d: float
    grid: tuple

    def reference(self, n):
        """``n`` points per branch of the analytic distance-``d`` level set."""
        t = 2 * math.pi * np.arange(n) / n
        if self.model == "sphere":
            R = self.spec.params["R"]
            lat = self.d / R
            return np.vstack([np.stack([R * math.cos(lat) * np.cos(t), R * math.cos(lat) * np.sin(t),
                                        np.full(n, s * R * math.sin(lat))], axis=1) for s in (1, -1)])
        if self.model == "cylinder":
            R = self.spec.params["R"]
            return np.vstack([np.stack([R * np.cos(t), R * np.sin(t), np.full(n, s * self.d)], axis=1)
                              for s in (1, -1)])
        raise KeyError(self.model)


def offset_case(model, d=None, grid=None):
    """Unit sphere with its equator (d = 0.3) or unit cylinder with a cross-section (d = 0.5)."""
    if model == "sphere":
        spec = SurfaceSpec("sphere")
        return OffsetCase(model, spec, iso_v(spec, 0.0, 8192), 0.3 if d is None else d,
                          grid or SPHERE_GRID)
    if model == "cylinder":
        spec = SurfaceSpec("cylinder")
        return OffsetCase(model, spec, iso_v(spec, 0.0, 8192), 0.5 if d is None else d,
                          grid or CYLINDER_GRID)
    raise KeyError(f"no benchmark case {model!r}")


def _row(suite, model, run, d, hd=None, cd=None):
    t = run.timings
    return {
        "suite": suite, "model": model, "segments": len(run.sites), "faces": int(run.mesh.n_f),
        "d": d, "hd": hd, "cd": cd, "seconds": t["total"],
        "phase_field": t["field"], "phase_voronoi": t["voronoi"], "phase_extract": t["extract"],
    }


def run_offset_case(case, segments=2000, seed=42, n_samples=N_SAMPLES, suite="accuracy"):
    """Offset the case's source curve and measure it against the analytic reference."""
    run = compute_offset(case.spec, case.curve, case.d, n_segments=segments, grid=case.grid, seed=seed)
    rep = hausdorff_cd(run.result.sample(n_samples), case.reference(n_samples))
    log.info("%s: HD %.3g CD %.3g in %.1f s", case.model, rep.hausdorff_one_directional,
             rep.chamfer, run.timings["total"])
    return _row(suite, case.model, run, case.d, rep.hausdorff_one_directional, rep.chamfer), run


def run_accuracy_suite(models=("sphere", "cylinder"), segments=2000, seed=42, grid=None,
                       keep_runs=False):
    """Accuracy rows; with ``keep_runs`` also the runs, for :func:`write_report` figures."""
    out = [run_offset_case(offset_case(m, grid=grid), segments, seed) for m in models]
    rows = [r for r, _ in out]
    return (rows, [run for _, run in out]) if keep_runs else rows


def sphere_geodesic_deviation(grid, pairs=1000, seed=42, init="dijkstra"):
    """Mean and max relative deviation of shortened geodesics from great-circle arcs.

    ``init`` selects the initial paths as in :func:`geodesic.geodesic_distances`.
    """
    spec = SurfaceSpec("sphere")
    mesh = build_uniform(spec, *grid)
    rng = np.random.default_rng(seed)
    x = evaluate(spec, mesh.uv[: mesh.n_v])
    t0 = time.perf_counter()
    pairs_st = []
    while len(pairs_st) < pairs:
        s, t = (int(k) for k in rng.integers(0, mesh.n_v, 2))
        if s != t:
            pairs_st.append((s, t))
    pairs_st = np.array(pairs_st)
    exact = np.arccos(np.clip(np.einsum("ij,ij->i", x[pairs_st[:, 0]], x[pairs_st[:, 1]]), -1.0, 1.0))
    rel = np.abs(geodesic_distances(mesh, pairs_st, init) - exact) / exact
    return {"faces": int(mesh.n_f), "grid": list(grid), "pairs": pairs, "init": init,
            "mean_rel_dev": float(rel.mean()), "max_rel_dev": float(rel.max()),
            "seconds": time.perf_counter() - t0}


def run_geodesic_suite(grids=GEODESIC_GRIDS, pairs=1000, seed=42, init="dijkstra"):
    return [sphere_geodesic_deviation(g, pairs, seed, init) for g in grids]


def linear_fit(x, y):
    r = stats.linregress(np.asarray(x, float), np.asarray(y, float))
    return {"slope": float(r.slope), "intercept": float(r.intercept), "r2": float(r.rvalue ** 2)}


def run_scaling_suite(segments=(500, 1000, 2000, 4000), distances=(0.1, 0.2, 0.3, 0.4),
                      grid=SPHERE_GRID, seed=42):
    """Sphere equator runs: time against segment count at d = 0.3, and against d at 2000 segments.

    Timings cover the whole pipeline (mesh build and site insertion included).
    """
    case = offset_case("sphere", grid=grid)
    seg_rows = []
    for n in segments:
        run = compute_offset(case.spec, case.curve, case.d, n_segments=n, grid=grid, seed=seed)
        seg_rows.append(_row("scaling_segments", "sphere", run, case.d))
        log.info("segments %d: %.1f s", n, run.timings["total"])
    d_rows = []
    for d in distances:
        run = compute_offset(case.spec, case.curve, d, n_segments=2000, grid=grid, seed=seed)
        d_rows.append(_row("scaling_distance", "sphere", run, d))
        log.info("d %.2f: %.1f s", d, run.timings["total"])
    fit = linear_fit([r["segments"] for r in seg_rows], [r["seconds"] for r in seg_rows])
    t = [r["seconds"] for r in d_rows]
    return {"segments": seg_rows, "distances": d_rows, "fit": fit,
            "monotone_in_d": bool(all(b >= a for a, b in zip(t, t[1:])))}


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r[k]) for k in CSV_FIELDS})


def write_report(out_dir, accuracy=None, geodesic=None, scaling=None, runs=None):
    """CSV, JSON and figures for whichever suites were run.

    ``runs`` are offset runs matching the ``accuracy`` rows; each gets a
    parameter-space figure of its offset and source.
    """
    from . import plotting
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = list(accuracy or [])
    if scaling:
        rows += scaling["segments"] + scaling["distances"]
    write_csv(rows, out / "bench.csv")
    if geodesic:
        with open(out / "geodesic.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["faces", "pairs", "mean_rel_dev", "max_rel_dev", "seconds"],
                               extrasaction="ignore")
            w.writeheader()
            w.writerows(geodesic)
        plotting.plot_geodesic_deviation(geodesic, out / "geodesic_deviation.png")
    if scaling:
        plotting.plot_scaling(scaling["segments"], scaling["fit"], out / "scaling_segments.png")
        plotting.plot_distance_sweep(scaling["distances"], out / "scaling_distance.png")
    for row, run in zip(accuracy or [], runs or []):
        lines = [(p.uv, p.closed) for p in run.result.polylines]
        plotting.plot_offsets(run.mesh.spec, lines, [(run.sites.uv, run.sites.closed)],
                              out / f"offset_{row['model']}.png",
                              title=f"{row['model']}, d = {row['d']:g}")
    doc = {"accuracy": accuracy, "geodesic": geodesic, "scaling": scaling}
    (out / "bench.json").write_text(json.dumps(doc, indent=2, sort_keys=True))
    return out
