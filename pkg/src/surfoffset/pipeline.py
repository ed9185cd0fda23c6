"""End-to-end offset computation: mesh, sites, field, cells, level set."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .curve import SiteSet, discretize
from .errors import ConfigurationError
from .geodesic import build_distance_field
from .mesh import build_uniform
from .offset import extract_offset
from .voronoi import compute_voronoi

log = logging.getLogger(__name__)


def default_cutoff(d, spacing, max_edge=0.0):
    """Band radius for the field: faces crossed by the level set must be inside it."""
    return max(1.5 * d, d + 3.0 * max_edge) + 2.0 * spacing


@dataclass
class OffsetRun:
    result: object
    mesh: object
    sites: SiteSet
    site_vertices: np.ndarray
    field: object
    labeled: object
    timings: dict = field(default_factory=dict)


def prepare_sites(spec, curves, n_segments, grid):
    """Build the grid mesh and insert discretized sites of one or more curves.

    ``n_segments`` is split over the curves in proportion to their length.
    """
    if isinstance(curves, (list, tuple)):
        curves = list(curves)
    else:
        curves = [curves]
    nu, nv = grid
    if nu < 8 or nv < 8:
        raise ConfigurationError("grid must be at least 8 x 8")
    mesh = build_uniform(spec, nu, nv)
    lengths = np.array([c.length(spec) for c in curves])
    counts = np.maximum(3, np.round(n_segments * lengths / lengths.sum()).astype(int))
    sets = [discretize(c, int(k), spec) for c, k in zip(curves, counts)]
    sites = sets[0] if len(sets) == 1 else SiteSet.concat(sets)
    ids = np.array([mesh.insert_site(p) for p in sites.uv], np.int64)
    mesh.validate(0.0)
    return mesh, sites, ids


def field_on_mesh(mesh, sites, ids, d, cutoff=None, alpha=0.2, init="dijkstra", seed=42):
    """Nearest-site field over the band; returns the field and the cutoff used."""
    if cutoff is None:
        cutoff = default_cutoff(d, sites.mean_spacing, float(mesh.elen[: mesh.n_e].max()))
    if d >= cutoff:
        raise ConfigurationError(f"cutoff {cutoff} must exceed the offset distance {d}")
    fld = build_distance_field(mesh, ids, cutoff, sites.prev, sites.next, alpha=alpha,
                               init=init, seed=seed)
    return fld, cutoff


def offset_from_field(mesh, sites, ids, fld, d, diameter=None, timings=None):
    """Voronoi cells and the level set for an already computed field."""
    timings = {} if timings is None else timings
    t0 = time.perf_counter()
    lab = compute_voronoi(mesh, fld, sites)
    t1 = time.perf_counter()
    res = extract_offset(lab, d, fld.cutoff, diameter)
    timings.update(voronoi=t1 - t0, extract=time.perf_counter() - t1)
    return OffsetRun(res, mesh, sites, ids, fld, lab, timings)


def offset_from_mesh(mesh, sites, ids, d, cutoff=None, alpha=0.2, init="dijkstra",
                     seed=42, diameter=None):
    """Field, Voronoi cells and level set on a mesh that already holds the sites."""
    t0 = time.perf_counter()
    fld, _ = field_on_mesh(mesh, sites, ids, d, cutoff, alpha, init, seed)
    timings = {"field": time.perf_counter() - t0}
    return offset_from_field(mesh, sites, ids, fld, d, diameter, timings)


def compute_offset(spec, curves, d, n_segments=2000, grid=(201, 127), cutoff=None,
                   alpha=0.2, init="dijkstra", seed=42):
    t0 = time.perf_counter()
    mesh, sites, ids = prepare_sites(spec, curves, n_segments, grid)
    t1 = time.perf_counter()
    run = offset_from_mesh(mesh, sites, ids, d, cutoff, alpha, init, seed)
    run.timings["setup"] = t1 - t0
    run.timings["total"] = time.perf_counter() - t0
    return run
