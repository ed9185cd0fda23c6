"""Source curves in the parameter domain and their discretization into sites."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ResolutionError
from .surface import segment_lengths

MIN_SAMPLES = 16


@dataclass(frozen=True)
class SourceCurve:
    """Dense parameter-space polyline.  Closed curves do not repeat the first sample."""
    samples: np.ndarray
    closed: bool = False

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[1] != 2:
            raise ConfigurationError("curve samples must be an (n, 2) array")
        if len(s) < MIN_SAMPLES:
            raise ConfigurationError(f"curve needs at least {MIN_SAMPLES} samples, got {len(s)}")
        if self.closed and np.allclose(s[0], s[-1]):
            s = s[:-1]
        object.__setattr__(self, "samples", s)

    def unwrapped(self, spec):
        """Samples shifted by whole periods so consecutive samples are close."""
        s = spec.wrap(self.samples)
        out = s.copy()
        for i in range(1, len(s)):
            out[i] = spec.unwrap_near(s[i], out[i - 1])
        return out

    def segment_lengths(self, spec):
        """Induced lengths of the polyline segments (closing segment last if closed)."""
        p = self.unwrapped(spec)
        q = p[1:]
        if self.closed:
            q = np.vstack([q, spec.unwrap_near(p[0], p[-1])])
        lens = segment_lengths(spec, p[: len(q)], q)
        if np.any(lens <= 0):
            raise ConfigurationError("consecutive curve samples must be distinct")
        return lens

    def length(self, spec):
        return float(self.segment_lengths(spec).sum())

    def reversed(self):
        return SourceCurve(self.samples[::-1].copy(), self.closed)

    def to_dict(self):
        return {"closed": self.closed, "samples": self.samples.tolist()}


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def circle_uv(center, radius, samples=1024, phase=0.0):
    """Counterclockwise parameter-space circle."""
    t = phase + 2 * math.pi * np.arange(samples) / samples
    c = np.asarray(center, dtype=float)
    pts = c + radius * np.stack([np.cos(t), np.sin(t)], axis=1)
    return SourceCurve(pts, closed=True)


def segment_uv(a, b, samples=256):
    t = np.linspace(0.0, 1.0, samples)[:, None]
    a, b = np.asarray(a, float), np.asarray(b, float)
    return SourceCurve(a + t * (b - a), closed=False)


def iso_v(spec, v, samples=1024):
    """The curve ``v = const`` across the whole ``u`` range (closed if ``u`` is periodic)."""
    u0, u1 = spec.domain[0], spec.domain[1]
    if spec.periodic[0]:
        u = u0 + (u1 - u0) * np.arange(samples) / samples
    else:
        u = np.linspace(u0, u1, samples)
    return SourceCurve(np.stack([u, np.full_like(u, v)], axis=1), closed=bool(spec.periodic[0]))


def iso_u(spec, u, samples=1024):
    v0, v1 = spec.domain[2], spec.domain[3]
    if spec.periodic[1]:
        v = v0 + (v1 - v0) * np.arange(samples) / samples
    else:
        v = np.linspace(v0, v1, samples)
    return SourceCurve(np.stack([np.full_like(v, u), v], axis=1), closed=bool(spec.periodic[1]))


_GENERATORS = {"circle_uv", "segment_uv", "iso_v", "iso_u"}


def curve_from_dict(d, spec=None):
    """Build a curve from its JSON form (explicit samples or a named generator)."""
    if "generator" in d:
        g = d["generator"]
        n = int(d.get("samples", 1024))
        if g == "circle_uv":
            return circle_uv(d["center"], float(d["radius"]), n, float(d.get("phase", 0.0)))
        if g == "segment_uv":
            return segment_uv(d["start"], d["end"], n)
        if g in ("iso_v", "iso_u"):
            if spec is None:
                raise ConfigurationError(f"generator {g} needs the surface")
            fn = iso_v if g == "iso_v" else iso_u
            return fn(spec, float(d["value"]), n)
        raise ConfigurationError(f"unknown curve generator {g!r}; expected one of {sorted(_GENERATORS)}")
    if "samples" not in d:
        raise ConfigurationError("curve JSON needs 'samples' or 'generator'")
    return SourceCurve(np.asarray(d["samples"], dtype=float), bool(d.get("closed", False)))


def load_curve(path_or_dict, spec=None):
    if isinstance(path_or_dict, dict):
        return curve_from_dict(path_or_dict, spec)
    return curve_from_dict(json.loads(Path(path_or_dict).read_text()), spec)


# ---------------------------------------------------------------------------
# sites
# ---------------------------------------------------------------------------

@dataclass
class SiteSet:
    """Representative points of one or more discretized curves.

    ``prev``/``next`` link each site to its neighbours along its own curve
    (``-1`` past the ends of open curves); ``curve`` gives the index of the
    curve a site came from.
    """
    uv: np.ndarray
    arc: np.ndarray
    closed: bool
    total_length: float
    prev: np.ndarray
    next: np.ndarray
    curve: np.ndarray

    def __len__(self):
        return len(self.uv)

    @property
    def mean_spacing(self):
        n = len(self.uv)
        gaps = n if self.closed else n - 1
        return self.total_length / max(gaps, 1)

    @staticmethod
    def concat(sets):
        uv, arc, prev, nxt, cur = [], [], [], [], []
        off = 0
        for k, s in enumerate(sets):
            uv.append(s.uv)
            arc.append(s.arc)
            prev.append(np.where(s.prev >= 0, s.prev + off, -1))
            nxt.append(np.where(s.next >= 0, s.next + off, -1))
            cur.append(np.full(len(s), k))
            off += len(s)
        return SiteSet(np.vstack(uv), np.concatenate(arc), all(s.closed for s in sets),
                       float(sum(s.total_length for s in sets)), np.concatenate(prev),
                       np.concatenate(nxt), np.concatenate(cur))


def _point_at_arc(spec, p, q, lens, cum, s):
    """Parameter points at arc positions ``s`` along the polyline ``p[i] -> q[i]``."""
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(lens) - 1)
    need = s - cum[idx]
    a, b = p[idx], q[idx]
    lo = np.zeros(len(s))
    hi = np.ones(len(s))
    # the induced length along a segment is monotone in t: bisect
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        got = segment_lengths(spec, a, a + mid[:, None] * (b - a), rtol=1e-12)
        below = got < need
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    t = 0.5 * (lo + hi)
    return spec.wrap(a + t[:, None] * (b - a))


def discretize(curve, n, spec):
    """Split ``curve`` into ``n`` pieces of equal induced length, one site each.

    Closed curves put site ``k`` at arc position ``(k + 1/2) L / n``, the
    midpoint of its piece.  Open curves put sites at ``k L / (n - 1)`` so the
    end sites sit on the curve ends and own half-length end pieces.
    """
    n = int(n)
    if n < 3:
        raise ConfigurationError("need at least 3 sites")
    nseg = len(curve.samples) if curve.closed else len(curve.samples) - 1
    if n > nseg + (0 if curve.closed else 1):
        raise ResolutionError(f"{n} sites requested but the curve has only {nseg} segments")
    p = curve.unwrapped(spec)
    q = p[1:]
    if curve.closed:
        q = np.vstack([q, spec.unwrap_near(p[0], p[-1])])
    p = p[: len(q)]
    lens = curve.segment_lengths(spec)
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    total = float(cum[-1])
    if curve.closed:
        arc = (np.arange(n) + 0.5) * total / n
        prev = (np.arange(n) - 1) % n
        nxt = (np.arange(n) + 1) % n
    else:
        arc = np.arange(n) * total / (n - 1)
        arc[-1] = total
        prev = np.arange(n) - 1
        nxt = np.arange(n) + 1
        nxt[-1] = -1
    uv = _point_at_arc(spec, p, q, lens, cum[:-1], arc)
    if not curve.closed:
        uv[0] = spec.wrap(p[0])
        uv[-1] = spec.wrap(q[-1])
    return SiteSet(uv, arc, curve.closed, total, prev, nxt, np.zeros(n, np.int64))


def brute_force_curve_distance(curve, p, spec, mesh):
    """Smallest flip-shortened distance from mesh vertex ``p`` to any curve sample.

    Test oracle: the samples are inserted into a private copy of ``mesh``.
    """
    from .geodesic import geodesic_distance
    work = mesh.copy()
    ids = sorted({work.insert_site(s) for s in spec.wrap(curve.samples)})
    return min(geodesic_distance(work, int(p), v) for v in ids)
