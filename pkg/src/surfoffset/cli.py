"""Command-line interface: ``surfoffset offset|geodesic|voronoi|morph|bench``.

Exit codes: 0 on success, 2 on bad configuration or input, 3 on numerical
failure (non-converged paths, 1-Lipschitz violations, refinement failures).
Warnings are collected into ``<out>.diag.json`` next to the outputs.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import (ConfigurationError, ConnectivityError, DegenerateMetricError, DomainError,
                     InternalError, RefinementError, ResolutionError, UnsupportedInputError)

log = logging.getLogger("surfoffset")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
CONFIG_ERRORS = (ConfigurationError, DomainError, ResolutionError, UnsupportedInputError,
                 FileNotFoundError, json.JSONDecodeError, KeyError)
NUMERIC_ERRORS = (RefinementError, ConnectivityError, DegenerateMetricError, InternalError)
LOG_LEVELS = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
FORMATS = ("obj", "svg", "json")


class NumericalFailure(Exception):
    def __init__(self, msg, diagnostics):
        super().__init__(msg)
        self.diagnostics = diagnostics


class _Collector(logging.Handler):
    """Keeps warning records for the diagnostic JSON."""

    def __init__(self):
        super().__init__(logging.WARNING)
        self.records = []

    def emit(self, record):
        self.records.append({"level": record.levelname, "logger": record.name,
                             "message": record.getMessage()})


def _setup_logging():
    name = os.environ.get("SURFOFFSET_LOG", "info").lower()
    if name not in LOG_LEVELS:
        name = "info"
    root = logging.getLogger("surfoffset")
    root.setLevel(logging.DEBUG)
    for h in list(root.handlers):
        root.removeHandler(h)
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(LOG_LEVELS[name])
    console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(console)
    root.propagate = False
    coll = _Collector()
    root.addHandler(coll)
    return coll


def _pair(kind, cast=float):
    def parse(s):
        try:
            a, b = (cast(x) for x in s.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"{kind} must be two comma-separated numbers, got {s!r}")
        return a, b
    return parse


def _positive(s):
    x = float(s)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {s}")
    return x


def _formats(s):
    out = [f.strip() for f in s.split(",") if f.strip()]
    bad = set(out) - set(FORMATS)
    if bad:
        raise argparse.ArgumentTypeError(f"unknown formats {sorted(bad)}; choose from {FORMATS}")
    return out


def _set_threads(n):
    """Cap numba's thread pool; the default leaves all cores available."""
    if n is None:
        return None
    import numba
    numba.config.THREADING_LAYER = "workqueue"
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def build_parser():
    p = argparse.ArgumentParser(prog="surfoffset", description="Geodesic offsets of curves on parametric surfaces.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, curves=True):
        sp.add_argument("--surface", required=True, help="surface JSON")
        if curves:
            sp.add_argument("--curve", required=True, action="append",
                            help="curve JSON (repeat for several curves)")
            sp.add_argument("--segments", type=int, default=2000, help="source segments (default 2000)")
        sp.add_argument("--grid", type=_pair("grid", int), default=(201, 127), help="samples nu,nv")
        sp.add_argument("--seed", type=int, default=42)
        sp.add_argument("--threads", type=int, default=None)

    o = sub.add_parser("offset", help="offset curves at a geodesic distance")
    common(o)
    o.add_argument("--distance", type=_positive, required=True)
    o.add_argument("--cutoff", type=_positive, default=None)
    o.add_argument("--alpha", type=float, default=0.2, help="candidate slack of the field search")
    o.add_argument("--init", choices=("dijkstra", "random_waypoints"), default="dijkstra")
    o.add_argument("--formats", type=_formats, default=list(FORMATS))
    o.add_argument("--out", required=True, help="output prefix")

    g = sub.add_parser("geodesic", help="shortest path between two parameter points")
    common(g, curves=False)
    g.add_argument("--source", type=_pair("source"), required=True, help="u,v")
    g.add_argument("--target", type=_pair("target"), required=True, help="u,v")
    g.add_argument("--init", choices=("best", "dijkstra", "steiner"), default="best",
                   help="initial path: edge graph, Steiner graph, or best (shortest over both "
                        "plus near-tie restarts, the default)")
    g.add_argument("--out", default=None, help="output prefix for .obj and .json")

    v = sub.add_parser("voronoi", help="geodesic Voronoi cells of curve sites (debug SVG)")
    common(v)
    v.add_argument("--cutoff", type=_positive, required=True)
    v.add_argument("--out", required=True)

    m = sub.add_parser("morph", help="opening or closing of a region bounded by closed curves")
    common(m)
    m.add_argument("--op", choices=("opening", "closing", "dilate", "erode"), required=True)
    m.add_argument("--distance", type=_positive, required=True)
    m.add_argument("--formats", type=_formats, default=list(FORMATS))
    m.add_argument("--out", required=True)

    b = sub.add_parser("bench", help="accuracy, geodesic and scaling experiments")
    b.add_argument("--suite", choices=("accuracy", "geodesic", "scaling", "all"), default="all")
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--pairs", type=int, default=1000)
    b.add_argument("--quick", action="store_true", help="small sizes for a smoke run")
    b.add_argument("--seed", type=int, default=42)
    b.add_argument("--threads", type=int, default=None)
    return p


def _load(args):
    from .curve import load_curve
    from .surface import load_surface
    spec = load_surface(args.surface)
    curves = [load_curve(c, spec) for c in getattr(args, "curve", None) or []]
    return spec, curves


def _check_grid(grid):
    if grid[0] < 8 or grid[1] < 8:
        raise ConfigurationError("grid must be at least 8 x 8")


def _write_outputs(result, prefix, formats, source):
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    written = []
    if "obj" in formats:
        result.write_obj(f"{prefix}.obj")
        written.append(f"{prefix}.obj")
    if "svg" in formats:
        result.write_svg(f"{prefix}.svg", source=source)
        written.append(f"{prefix}.svg")
    if "json" in formats:
        result.write_json(f"{prefix}.json")
        written.append(f"{prefix}.json")
    return written


def cmd_offset(args):
    from .geodesic import detect_field_inconsistency
    from .pipeline import field_on_mesh, offset_from_field, prepare_sites
    spec, curves = _load(args)
    _check_grid(args.grid)
    if args.segments < 3:
        raise ConfigurationError("--segments must be at least 3")
    mesh, sites, ids = prepare_sites(spec, curves, args.segments, tuple(args.grid))
    fld, cutoff = field_on_mesh(mesh, sites, ids, args.distance, args.cutoff, args.alpha,
                                args.init, args.seed)
    bad = detect_field_inconsistency(mesh, fld)
    diag = {
        "command": "offset",
        "cutoff": cutoff,
        "queries": fld.n_queries,
        "nonconverged": fld.n_nonconverged,
        "lipschitz_violations": [list(mesh.edge_vertices(int(e))) for e in bad],
    }
    if len(bad):
        log.warning("%d edges violate the 1-Lipschitz bound", len(bad))
    try:
        run = offset_from_field(mesh, sites, ids, fld, args.distance)
    except InternalError as exc:
        if not len(bad):
            raise
        raise NumericalFailure(f"{len(bad)} edges violate the 1-Lipschitz bound; extraction failed: {exc}",
                               diag)
    log.info("timings: field %.2f s, voronoi %.2f s, extract %.2f s", fld.seconds,
             run.timings["voronoi"], run.timings["extract"])
    diag.update(polylines=len(run.result.polylines), closed=run.result.n_closed,
                outputs=_write_outputs(run.result, args.out, args.formats,
                                       [(c.samples, c.closed) for c in curves]))
    if len(bad) or fld.n_nonconverged:
        raise NumericalFailure(f"{len(bad)} edges violate the 1-Lipschitz bound, "
                               f"{fld.n_nonconverged} refinements did not converge", diag)
    return diag


def cmd_geodesic(args):
    from .geodesic import geodesic_path
    from .mesh import build_uniform
    from .surface import evaluate
    spec, _ = _load(args)
    _check_grid(args.grid)
    mesh = build_uniform(spec, *args.grid)
    s = mesh.insert_site(np.array(args.source))
    t = mesh.insert_site(np.array(args.target))
    if s == t:
        raise ConfigurationError("source and target coincide")
    res = geodesic_path(mesh, s, t, args.init)
    xyz = evaluate(spec, spec.wrap(res.uv))
    doc = {"command": "geodesic", "length": res.length, "initial_length": res.init_length,
           "init": args.init, "iterations": res.iterations, "converged": res.converged,
           "uv": np.round(res.uv, 15).tolist()}
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(f"{args.out}.obj", "w") as fh:
            for x, y, z in xyz:
                fh.write(f"v {x:.12g} {y:.12g} {z:.12g}\n")
            fh.write("l " + " ".join(str(i + 1) for i in range(len(xyz))) + "\n")
        Path(f"{args.out}.json").write_text(json.dumps(doc, sort_keys=True))
        doc["outputs"] = [f"{args.out}.obj", f"{args.out}.json"]
    print(json.dumps({k: doc[k] for k in ("length", "iterations", "converged")}, sort_keys=True))
    if not res.converged:
        raise NumericalFailure("path shortening did not converge", doc)
    return doc


def cmd_voronoi(args):
    from .geodesic import build_distance_field
    from .pipeline import prepare_sites
    from .plotting import voronoi_svg
    from .voronoi import compute_voronoi
    spec, curves = _load(args)
    mesh, sites, ids = prepare_sites(spec, curves, args.segments, tuple(args.grid))
    fld = build_distance_field(mesh, ids, args.cutoff, sites.prev, sites.next, seed=args.seed)
    lab = compute_voronoi(mesh, fld, sites)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(f"{args.out}.voronoi.svg").write_text(voronoi_svg(lab))
    labels, counts = np.unique(lab.labels[lab.labels >= 0], return_counts=True)
    doc = {"command": "voronoi", "faces": lab.n_faces, "sites": len(sites),
           "cells": {int(k): int(c) for k, c in zip(labels, counts)}}
    Path(f"{args.out}.voronoi.json").write_text(json.dumps(doc, sort_keys=True))
    doc["outputs"] = [f"{args.out}.voronoi.svg", f"{args.out}.voronoi.json"]
    return doc


def cmd_morph(args):
    from .morphology import OPERATIONS, Region, region_result
    spec, curves = _load(args)
    _check_grid(args.grid)
    region = Region(curves, spec)
    out = OPERATIONS[args.op](region, args.distance, n_segments=args.segments,
                              grid=tuple(args.grid), seed=args.seed)
    res = region_result(out, args.distance)
    return {"command": "morph", "op": args.op, "loops_in": len(region), "loops_out": len(out),
            "outputs": _write_outputs(res, args.out, args.formats, region.polylines())}


def cmd_bench(args):
    from . import bench
    out = Path(args.out)
    acc = geo = sca = runs = None
    if args.quick:
        if args.suite in ("accuracy", "all"):
            acc, runs = bench.run_accuracy_suite(segments=300, seed=args.seed, grid=(61, 31),
                                                 keep_runs=True)
        if args.suite in ("geodesic", "all"):
            geo = bench.run_geodesic_suite(((11, 6), (33, 22)), min(args.pairs, 50), args.seed)
        if args.suite in ("scaling", "all"):
            sca = bench.run_scaling_suite((100, 200, 300), (0.1, 0.2), (61, 31), args.seed)
    else:
        if args.suite in ("accuracy", "all"):
            acc, runs = bench.run_accuracy_suite(seed=args.seed, keep_runs=True)
        if args.suite in ("geodesic", "all"):
            geo = bench.run_geodesic_suite(pairs=args.pairs, seed=args.seed)
        if args.suite in ("scaling", "all"):
            sca = bench.run_scaling_suite(seed=args.seed)
    bench.write_report(out, acc, geo, sca, runs)
    return {"command": "bench", "suite": args.suite, "outputs": sorted(str(p) for p in out.iterdir())}


COMMANDS = {"offset": cmd_offset, "geodesic": cmd_geodesic, "voronoi": cmd_voronoi,
            "morph": cmd_morph, "bench": cmd_bench}


def _write_diag(args, doc):
    prefix = getattr(args, "out", None)
    if not prefix or args.command == "bench":
        return
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    Path(f"{prefix}.diag.json").write_text(json.dumps(doc, indent=2, sort_keys=True))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    coll = _setup_logging()
    _set_threads(args.threads)
    status, doc = EXIT_OK, {"command": args.command}
    try:
        doc = COMMANDS[args.command](args)
        doc["status"] = "ok"
    except NumericalFailure as exc:
        status, doc = EXIT_NUMERIC, dict(exc.diagnostics, status="numerical_failure", error=str(exc))
    except NUMERIC_ERRORS as exc:
        status = EXIT_NUMERIC
        doc.update(status="numerical_failure", error=f"{type(exc).__name__}: {exc}")
    except CONFIG_ERRORS as exc:
        status = EXIT_CONFIG
        doc.update(status="configuration_error", error=f"{type(exc).__name__}: {exc}")
    doc["warnings"] = coll.records
    _write_diag(args, doc)
    if status != EXIT_OK:
        print(json.dumps({k: doc[k] for k in ("status", "error")}, sort_keys=True), file=sys.stderr)
        if status == EXIT_CONFIG:
            parser.print_usage(sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
