"""Regions bounded by closed loops and their erosion, dilation, opening and closing.

A region is the even-odd interior of a set of closed parameter-space
loops.  Dilation and erosion take the full distance-``d`` level set of the
region boundary and keep the components lying outside (dilate) or inside
(erode) the region, decided by classifying one point of each component.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .curve import MIN_SAMPLES, SourceCurve
from .errors import ConfigurationError, UnsupportedInputError
from .pipeline import compute_offset
from .surface import fundamental_form

log = logging.getLogger(__name__)


def signed_area(uv):
    """Shoelace area of a closed parameter polygon, positive when counterclockwise."""
    x, y = uv[:, 0], uv[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _crossings(loop, pts, chunk=1 << 22):
    """Number of loop edges crossed by the ray from each point towards +u."""
    step = max(1, chunk // max(len(loop), 1))
    if len(pts) > step:
        return np.concatenate([_crossings(loop, pts[i:i + step], chunk)
                               for i in range(0, len(pts), step)])
    a = loop
    b = np.roll(loop, -1, axis=0)
    px = pts[:, 0][:, None]
    py = pts[:, 1][:, None]
    ay, by = a[None, :, 1], b[None, :, 1]
    straddle = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = a[None, :, 0] + (py - ay) * (b[None, :, 0] - a[None, :, 0]) / (by - ay)
    return np.count_nonzero(straddle & (px < xint), axis=1)


@dataclass
class Region:
    """Even-odd interior of closed loops on a surface.

    Loops are stored in the fundamental domain with outer loops
    counterclockwise and holes clockwise.  Loops that cross a periodic seam
    are not supported.
    """
    loops: list
    spec: object
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        loops = []
        for c in self.loops:
            if not isinstance(c, SourceCurve):
                c = SourceCurve(np.asarray(c, dtype=float), closed=True)
            if not c.closed:
                raise ConfigurationError("region boundaries must be closed loops")
            loops.append(c)
        self.loops = loops
        self._check_seam()
        self._orient()

    def _check_seam(self):
        lo = np.array([self.spec.domain[0], self.spec.domain[2]])
        hi = lo + self.spec.extent
        for c in self.loops:
            s = c.unwrapped(self.spec)
            closing = self.spec.unwrap_near(s[0], s[-1])
            wraps = np.abs(closing - s[0]) > 1e-9 * self.spec.extent
            out = (s.min(axis=0) < lo - 1e-12) | (s.max(axis=0) > hi + 1e-12)
            if np.any(wraps) or np.any(out & np.asarray(self.spec.periodic)):
                raise UnsupportedInputError("regions whose boundary crosses a periodic seam are not supported")

    def _orient(self):
        out = []
        for i, c in enumerate(self.loops):
            depth = sum(int(_crossings(o.samples, c.samples[:1])[0] % 2)
                        for j, o in enumerate(self.loops) if j != i)
            ccw = signed_area(c.samples) > 0
            if ccw != (depth % 2 == 0):
                c = c.reversed()
            out.append(c)
        self.loops = out

    def __len__(self):
        return len(self.loops)

    @property
    def is_empty(self):
        return not self.loops

    def classify(self, p):
        """``True`` where points lie inside the region (even-odd rule)."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        if self.is_empty:
            return np.zeros(len(p), bool)
        q = self.spec.wrap(p)
        n = np.zeros(len(q), np.int64)
        for c in self.loops:
            n += _crossings(c.samples, q)
        return n % 2 == 1

    def area(self, n=512):
        """Induced-metric area by midpoint quadrature over an ``n x n`` cell grid."""
        if self.is_empty:
            return 0.0
        allp = np.vstack([c.samples for c in self.loops])
        lo = allp.min(axis=0)
        hi = allp.max(axis=0)
        h = (hi - lo) / n
        g = lo + (np.arange(n) + 0.5)[:, None] * h
        uu, vv = np.meshgrid(g[:, 0], g[:, 1], indexing="ij")
        pts = np.stack([uu.ravel(), vv.ravel()], axis=1)
        inside = self.classify(pts)
        E, F, G = fundamental_form(self.spec, pts[inside])
        return float(np.sqrt(np.maximum(E * G - F * F, 0.0)).sum() * h[0] * h[1])

    def polylines(self):
        return [(c.samples, True) for c in self.loops]


def _as_loop(uv):
    """Polyline vertices as a source loop: drop repeats, pad tiny loops to the sample minimum."""
    keep = np.ones(len(uv), bool)
    keep[1:] = np.linalg.norm(np.diff(uv, axis=0), axis=1) > 1e-14
    uv = uv[keep]
    if len(uv) > 1 and np.linalg.norm(uv[0] - uv[-1]) <= 1e-14:
        uv = uv[:-1]
    if len(uv) < 3:
        return None
    if len(uv) < MIN_SAMPLES:
        closed = np.vstack([uv, uv[:1]])
        t = np.linspace(0, len(uv), MIN_SAMPLES, endpoint=False)
        k = np.floor(t).astype(int)
        f = (t - k)[:, None]
        uv = closed[k] * (1 - f) + closed[k + 1] * f
    return SourceCurve(uv, closed=True)


def _level_components(region, d, n_segments, grid, cutoff, seed):
    if d <= 0:
        raise ConfigurationError("morphology distance must be positive")
    run = compute_offset(region.spec, region.loops, d, n_segments=n_segments, grid=grid,
                         cutoff=cutoff, seed=seed)
    return run.result


def _select(region, d, keep_inside, n_segments, grid, cutoff, seed):
    if region.is_empty:
        return Region([], region.spec)
    res = _level_components(region, d, n_segments, grid, cutoff, seed)
    warnings = list(res.warnings)
    loops = []
    for p in res.polylines:
        if not p.closed:
            warnings.append("open level-set component dropped")
            continue
        c = _as_loop(p.uv)
        if c is None:
            continue
        # every point of the component is at distance d from the boundary
        if bool(region.classify(region.spec.wrap(c.samples[:1]))[0]) == keep_inside:
            loops.append(c)
    for w in warnings:
        log.warning(w)
    return Region(loops, region.spec, warnings)


def dilate(region, d, n_segments=2000, grid=(201, 127), cutoff=None, seed=42):
    """Boundary of all points within geodesic distance ``d`` of the region."""
    return _select(region, d, False, n_segments, grid, cutoff, seed)


def erode(region, d, n_segments=2000, grid=(201, 127), cutoff=None, seed=42):
    """Boundary of the region points farther than ``d`` from its complement.

    May return an empty region.
    """
    return _select(region, d, True, n_segments, grid, cutoff, seed)


def opening(region, d, **kw):
    return dilate(erode(region, d, **kw), d, **kw)


def closing(region, d, **kw):
    return erode(dilate(region, d, **kw), d, **kw)


def region_result(region, d=0.0):
    """Region loops as lifted closed polylines, for the offset writers."""
    from .offset import OffsetResult, Polyline, densify_lift
    spec = region.spec
    tol = 1e-4 * spec.diameter_estimate()
    res = OffsetResult([], float(d), spec, list(region.warnings))
    for c in region.loops:
        pl = Polyline(c.samples.copy(), True, np.full(len(c.samples), -1, np.int64))
        pl.xyz, _ = densify_lift(spec, c.samples, True, tol)
        res.polylines.append(pl)
    return res


OPERATIONS = {"dilate": dilate, "erode": erode, "opening": opening, "closing": closing}
