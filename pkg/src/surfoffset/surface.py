"""Analytic parametric surfaces and the metric they induce on the parameter plane.

Every surface maps a rectangle ``[u0, u1] x [v0, v1]`` to R^3.  Points are
passed around as plain numpy arrays: ``(..., 2)`` for parameter points and
``(..., 3)`` for surface points.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, DegenerateMetricError, DomainError

TWO_PI = 2.0 * math.pi

KINDS = (
    "plane",
    "sphere",
    "cylinder",
    "torus",
    "gaussian_bump",
    "bivariate_sine",
    "spiral_paraboloid",
    "circular_wave",
)

# kind -> (default params, default domain, default periodic flags)
_DEFAULTS = {
    "plane": ({}, (0.0, 1.0, 0.0, 1.0), (False, False)),
    "sphere": ({"R": 1.0}, (0.0, TWO_PI, -math.pi / 2, math.pi / 2), (True, False)),
    "cylinder": ({"R": 1.0}, (0.0, TWO_PI, -1.0, 1.0), (True, False)),
    "torus": ({"R": 2.0, "r": 0.7}, (0.0, TWO_PI, 0.0, TWO_PI), (True, True)),
    "gaussian_bump": ({"A": 0.5, "sigma": 0.3}, (-1.0, 1.0, -1.0, 1.0), (False, False)),
    "bivariate_sine": ({"A": 0.15, "k": math.pi}, (-1.0, 1.0, -1.0, 1.0), (False, False)),
    "spiral_paraboloid": ({"a": 0.5, "c": 0.1}, (0.2, 1.0, 0.0, 2 * TWO_PI), (False, False)),
    "circular_wave": ({"A": 0.08, "omega": 8.0}, (-1.0, 1.0, -1.0, 1.0), (False, False)),
}

# Sphere poles are metric singularities; the usable v-range is shrunk by this
# fraction of the v-extent at each pole.
POLE_SHRINK = 1e-3

# Gauss-Legendre 5-point rule on [0, 1].
_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


class FundamentalForm(NamedTuple):
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray


@dataclass(frozen=True)
class SurfaceSpec:
    """An analytic surface from the fixed catalog.

    Parameters
    ----------
    kind : str
        One of :data:`KINDS`.
    params : dict
        Named shape parameters; missing ones take the kind's defaults.
    domain : tuple of float
        ``(u0, u1, v0, v1)``.
    periodic : tuple of bool
        Periodicity of the u and v axes.  A periodic axis has period equal to
        its extent.
    """

    kind: str
    params: dict = field(default_factory=dict)
    domain: tuple = None
    periodic: tuple = None

    def __post_init__(self):
        if self.kind not in _DEFAULTS:
            raise ConfigurationError(f"unknown surface kind {self.kind!r}; expected one of {KINDS}")
        dparams, ddomain, dper = _DEFAULTS[self.kind]
        params = dict(dparams)
        unknown = set(self.params) - set(dparams)
        if unknown:
            raise ConfigurationError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        params.update({k: float(v) for k, v in self.params.items()})
        object.__setattr__(self, "params", params)
        domain = tuple(float(x) for x in (self.domain if self.domain is not None else ddomain))
        periodic = tuple(bool(x) for x in (self.periodic if self.periodic is not None else dper))
        if len(domain) != 4 or len(periodic) != 2:
            raise ConfigurationError("domain needs 4 values and periodic needs 2 flags")
        if not (domain[1] > domain[0] and domain[3] > domain[2]):
            raise ConfigurationError(f"degenerate domain {domain}")
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "periodic", periodic)
        self._check_params()

    def _check_params(self):
        p = self.params
        if self.kind in ("sphere", "cylinder") and p["R"] <= 0:
            raise ConfigurationError(f"{self.kind} radius must be positive")
        if self.kind == "torus" and not (p["R"] > p["r"] > 0):
            raise ConfigurationError("torus needs R > r > 0")
        if self.kind == "gaussian_bump" and p["sigma"] <= 0:
            raise ConfigurationError("gaussian_bump needs sigma > 0")
        if self.kind == "spiral_paraboloid" and self.domain[0] <= 0 and p["c"] == 0:
            raise ConfigurationError("spiral_paraboloid is singular at u = 0 when c = 0")

    # -- domain helpers -------------------------------------------------

    @property
    def extent(self):
        u0, u1, v0, v1 = self.domain
        return np.array([u1 - u0, v1 - v0])

    @property
    def periods(self):
        """Period per axis, ``0.0`` for non-periodic axes."""
        return np.where(self.periodic, self.extent, 0.0)

    def usable_domain(self):
        """Domain with metric singularities (sphere poles) cut away."""
        u0, u1, v0, v1 = self.domain
        if self.kind == "sphere":
            shrink = POLE_SHRINK * (v1 - v0)
            v0 = max(v0, -math.pi / 2 + shrink)
            v1 = min(v1, math.pi / 2 - shrink)
        return (u0, u1, v0, v1)

    def wrap(self, p):
        """Map points into the domain; raises :class:`DomainError` off non-periodic axes."""
        p = np.array(p, dtype=float)
        lo = np.array([self.domain[0], self.domain[2]])
        ext = self.extent
        tol = 1e-12 * ext
        for ax in range(2):
            x = p[..., ax]
            if self.periodic[ax]:
                p[..., ax] = lo[ax] + np.mod(x - lo[ax], ext[ax])
            elif np.any((x < lo[ax] - tol[ax]) | (x > lo[ax] + ext[ax] + tol[ax])):
                raise DomainError(f"parameter {'uv'[ax]} outside [{lo[ax]}, {lo[ax] + ext[ax]}]")
        return p

    def unwrap_near(self, q, ref):
        """Shift ``q`` by whole periods so it is as close as possible to ``ref``."""
        q = np.array(q, dtype=float)
        per = self.periods
        for ax in range(2):
            if per[ax] > 0:
                q[..., ax] -= per[ax] * np.round((q[..., ax] - ref[..., ax]) / per[ax])
        return q

    def param_distance(self, p, q):
        """Euclidean parameter distance using the nearest periodic representative."""
        p = np.asarray(p, dtype=float)
        return np.linalg.norm(self.unwrap_near(q, p) - p, axis=-1)

    # -- (de)serialization ------------------------------------------------

    def to_dict(self):
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "domain": list(self.domain),
            "periodic": list(self.periodic),
        }

    @classmethod
    def from_dict(cls, d):
        if "kind" not in d:
            raise ConfigurationError("surface JSON needs a 'kind'")
        return cls(d["kind"], d.get("params", {}), d.get("domain"), d.get("periodic"))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def diameter_estimate(self, n=64):
        """Bounding-box diagonal of the surface image, from an ``n x n`` sample."""
        u0, u1, v0, v1 = self.usable_domain()
        uu, vv = np.meshgrid(np.linspace(u0, u1, n), np.linspace(v0, v1, n))
        x = _embed(self, np.stack([uu.ravel(), vv.ravel()], axis=-1))
        return float(np.linalg.norm(x.max(axis=0) - x.min(axis=0)))


# ---------------------------------------------------------------------------
# raw embeddings and analytic partials (no domain checks)
# ---------------------------------------------------------------------------

def _embed(spec, p):
    u, v = p[..., 0], p[..., 1]
    k, q = spec.kind, spec.params
    if k == "plane":
        return np.stack([u, v, np.zeros_like(u)], axis=-1)
    if k == "sphere":
        R = q["R"]
        return np.stack([R * np.cos(u) * np.cos(v), R * np.sin(u) * np.cos(v), R * np.sin(v)], axis=-1)
    if k == "cylinder":
        R = q["R"]
        return np.stack([R * np.cos(u), R * np.sin(u), v], axis=-1)
    if k == "torus":
        w = q["R"] + q["r"] * np.cos(v)
        return np.stack([w * np.cos(u), w * np.sin(u), q["r"] * np.sin(v)], axis=-1)
    if k == "gaussian_bump":
        z = q["A"] * np.exp(-(u * u + v * v) / (2 * q["sigma"] ** 2))
        return np.stack([u, v, z], axis=-1)
    if k == "bivariate_sine":
        return np.stack([u, v, q["A"] * np.sin(q["k"] * u) * np.sin(q["k"] * v)], axis=-1)
    if k == "spiral_paraboloid":
        return np.stack([u * np.cos(v), u * np.sin(v), q["a"] * u * u + q["c"] * v], axis=-1)
    if k == "circular_wave":
        r = np.hypot(u, v)
        return np.stack([u, v, q["A"] * np.cos(q["omega"] * r)], axis=-1)
    raise ConfigurationError(k)


def _partials(spec, p):
    """Analytic ``(x_u, x_v)``, each shaped ``(..., 3)``."""
    u, v = p[..., 0], p[..., 1]
    k, q = spec.kind, spec.params
    one, zero = np.ones_like(u), np.zeros_like(u)
    if k == "plane":
        return np.stack([one, zero, zero], -1), np.stack([zero, one, zero], -1)
    if k == "sphere":
        R = q["R"]
        cu, su, cv, sv = np.cos(u), np.sin(u), np.cos(v), np.sin(v)
        return (np.stack([-R * su * cv, R * cu * cv, zero], -1),
                np.stack([-R * cu * sv, -R * su * sv, R * cv], -1))
    if k == "cylinder":
        R = q["R"]
        return np.stack([-R * np.sin(u), R * np.cos(u), zero], -1), np.stack([zero, zero, one], -1)
    if k == "torus":
        R, r = q["R"], q["r"]
        cu, su, cv, sv = np.cos(u), np.sin(u), np.cos(v), np.sin(v)
        w = R + r * cv
        return (np.stack([-w * su, w * cu, zero], -1),
                np.stack([-r * sv * cu, -r * sv * su, r * cv], -1))
    if k == "gaussian_bump":
        s2 = q["sigma"] ** 2
        z = q["A"] * np.exp(-(u * u + v * v) / (2 * s2))
        return np.stack([one, zero, -u / s2 * z], -1), np.stack([zero, one, -v / s2 * z], -1)
    if k == "bivariate_sine":
        A, kk = q["A"], q["k"]
        return (np.stack([one, zero, A * kk * np.cos(kk * u) * np.sin(kk * v)], -1),
                np.stack([zero, one, A * kk * np.sin(kk * u) * np.cos(kk * v)], -1))
    if k == "spiral_paraboloid":
        a, c = q["a"], q["c"]
        cv, sv = np.cos(v), np.sin(v)
        return (np.stack([cv, sv, 2 * a * u], -1),
                np.stack([-u * sv, u * cv, c * one], -1))
    if k == "circular_wave":
        A, w = q["A"], q["omega"]
        r = np.hypot(u, v)
        # sin(w r)/r written through sinc so the origin is regular
        s = -A * w * w * np.sinc(w * r / math.pi)
        return np.stack([one, zero, s * u], -1), np.stack([zero, one, s * v], -1)
    raise ConfigurationError(k)


def _fd_partials(spec, p):
    h = 1e-6 * spec.extent
    du = np.array([h[0], 0.0])
    dv = np.array([0.0, h[1]])
    xu = (_embed(spec, p + du) - _embed(spec, p - du)) / (2 * h[0])
    xv = (_embed(spec, p + dv) - _embed(spec, p - dv)) / (2 * h[1])
    return xu, xv


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def evaluate(spec, p):
    """Embed parameter point(s) ``p`` (shape ``(..., 2)``) onto the surface."""
    return _embed(spec, spec.wrap(p))


def fundamental_form(spec, p, method="analytic"):
    """First fundamental form ``(E, F, G)`` at ``p``.

    ``method="fd"`` uses central differences with a step of 1e-6 of the domain
    extent instead of the analytic partials.
    """
    p = spec.wrap(p)
    xu, xv = _partials(spec, p) if method == "analytic" else _fd_partials(spec, p)
    E = np.sum(xu * xu, axis=-1)
    F = np.sum(xu * xv, axis=-1)
    G = np.sum(xv * xv, axis=-1)
    # relative test: at an exact sphere pole E is ~1e-33, not 0
    if np.any(E * G - F * F <= 1e-24 * (E + G) ** 2):
        raise DegenerateMetricError(f"degenerate first fundamental form on {spec.kind}")
    return FundamentalForm(E, F, G)


def _panel_sum(spec, p, d, npan):
    """Composite 5-point Gauss-Legendre estimate with ``npan`` equal panels.

    ``p`` and ``d`` are ``(n, 2)``; the integrand is the induced speed
    ``|x_u du + x_v dv|`` along ``p + t d``.
    """
    t = ((np.arange(npan)[:, None] + _GL_X[None, :]) / npan).ravel()
    pts = p[:, None, :] + t[None, :, None] * d[:, None, :]
    xu, xv = _partials(spec, pts)
    E = np.sum(xu * xu, -1)
    G = np.sum(xv * xv, -1)
    F = np.sum(xu * xv, -1)
    if np.any(E * G - F * F <= 0):
        raise DegenerateMetricError(f"degenerate metric along a segment on {spec.kind}")
    speed = np.linalg.norm(xu * d[:, None, 0:1] + xv * d[:, None, 1:2], axis=-1)
    w = np.tile(_GL_W, npan) / npan
    return speed @ w


def segment_lengths(spec, p, q, rtol=1e-10, max_level=14):
    """Induced arc length of the straight parameter segments ``p[i] -> q[i]``.

    Both arrays are ``(n, 2)`` and are used as given (no periodic unwrapping),
    so callers can pass explicitly unwrapped coordinates.  The panel count is
    doubled per segment until two successive estimates agree to ``rtol``.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    d = q - p
    out = np.zeros(len(p))
    todo = np.flatnonzero(np.any(d != 0, axis=1))
    if todo.size == 0:
        return out
    prev = _panel_sum(spec, p[todo], d[todo], 1)
    npan = 2
    for _ in range(max_level):
        cur = _panel_sum(spec, p[todo], d[todo], npan)
        done = np.abs(cur - prev) <= rtol * np.abs(cur)
        out[todo[done]] = cur[done]
        todo, prev = todo[~done], cur[~done]
        if todo.size == 0:
            return out
        npan *= 2
    out[todo] = prev
    return out


def induced_length(spec, p, q):
    """Arc length of the surface image of the parameter segment ``p -> q``.

    Periodic axes use the shorter representative of ``q`` relative to ``p``.
    Accepts single points or ``(n, 2)`` batches.
    """
    p = spec.wrap(p)
    q = spec.unwrap_near(spec.wrap(q), p)
    single = p.ndim == 1
    out = segment_lengths(spec, np.atleast_2d(p), np.atleast_2d(q))
    return float(out[0]) if single else out


def load_surface(path_or_dict):
    if isinstance(path_or_dict, dict):
        return SurfaceSpec.from_dict(path_or_dict)
    return SurfaceSpec.load(path_or_dict)
