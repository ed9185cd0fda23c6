import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surfoffset.errors import ConfigurationError, DegenerateMetricError, DomainError
from surfoffset.surface import (KINDS, SurfaceSpec, evaluate, fundamental_form, induced_length,
                                load_surface)


def _random_points(spec, n, rng):
    u0, u1, v0, v1 = spec.usable_domain()
    return np.stack([rng.uniform(u0, u1, n), rng.uniform(v0, v1, n)], axis=1)


def test_evaluate_examples():
    assert np.allclose(evaluate(SurfaceSpec("plane"), [0.3, 0.7]), [0.3, 0.7, 0.0])
    assert np.allclose(evaluate(SurfaceSpec("sphere"), [0.0, 0.0]), [1.0, 0.0, 0.0])
    cyl = SurfaceSpec("cylinder", domain=(0, 2 * math.pi, -3, 3))
    assert np.allclose(evaluate(cyl, [math.pi / 2, 2.0]), [0.0, 1.0, 2.0])


def test_evaluate_out_of_domain():
    with pytest.raises(DomainError):
        evaluate(SurfaceSpec("plane"), [1.5, 0.5])
    # periodic axis wraps
    s = SurfaceSpec("cylinder")
    assert np.allclose(evaluate(s, [2 * math.pi + 0.1, 0.0]), evaluate(s, [0.1, 0.0]))


def test_fundamental_form_examples(rng):
    E, F, G = fundamental_form(SurfaceSpec("plane"), rng.uniform(0, 1, (20, 2)))
    assert np.allclose(E, 1) and np.allclose(F, 0) and np.allclose(G, 1)
    s = SurfaceSpec("sphere")
    p = _random_points(s, 50, rng)
    E, F, G = fundamental_form(s, p)
    assert np.allclose(E, np.cos(p[:, 1]) ** 2) and np.allclose(F, 0) and np.allclose(G, 1)
    E, F, G = fundamental_form(SurfaceSpec("cylinder", {"R": 2.0}), [0.4, 0.2])
    assert np.allclose([E, F, G], [4.0, 0.0, 1.0])


def test_sphere_pole_is_degenerate():
    with pytest.raises(DegenerateMetricError):
        fundamental_form(SurfaceSpec("sphere"), [0.3, math.pi / 2])


@pytest.mark.parametrize("kind", KINDS)
def test_metric_positive_definite(kind, rng):
    s = SurfaceSpec(kind)
    E, F, G = fundamental_form(s, _random_points(s, 100_000, rng))
    assert np.all(E > 0) and np.all(G > 0) and np.all(E * G - F * F > 0)


@pytest.mark.parametrize("kind", KINDS)
def test_finite_difference_agrees(kind, rng):
    s = SurfaceSpec(kind)
    u0, u1, v0, v1 = s.usable_domain()
    # stay a step away from non-periodic domain edges
    pad = 1e-3 * s.extent
    p = np.stack([rng.uniform(u0 + pad[0], u1 - pad[0], 500),
                  rng.uniform(v0 + pad[1], v1 - pad[1], 500)], axis=1)
    a = np.stack(fundamental_form(s, p))
    f = np.stack(fundamental_form(s, p, method="fd"))
    scale = np.maximum(np.abs(a[0]), np.abs(a[2]))
    assert np.max(np.abs(a - f) / scale) < 1e-5


def test_induced_length_examples():
    assert induced_length(SurfaceSpec("plane", domain=(0, 4, 0, 4)), [0, 0], [3, 4]) == pytest.approx(5.0, rel=1e-12)
    assert induced_length(SurfaceSpec("cylinder"), [0, 0], [math.pi / 2, 0]) == pytest.approx(math.pi / 2, rel=1e-10)


def test_induced_length_chord_sum_oracle():
    s = SurfaceSpec("gaussian_bump")
    p, q = np.array([-0.21, 0.05]), np.array([0.13, -0.08])
    t = np.linspace(0, 1, 10_001)[:, None]
    x = evaluate(s, p + t * (q - p))
    chord = np.linalg.norm(np.diff(x, axis=0), axis=1).sum()
    assert induced_length(s, p, q) == pytest.approx(chord, rel=1e-8)


def test_periodic_seam_uses_short_way():
    s = SurfaceSpec("cylinder")
    assert induced_length(s, [0.1, 0], [2 * math.pi - 0.1, 0]) == pytest.approx(0.2, rel=1e-10)


_kind = st.sampled_from(KINDS)
_unit = st.floats(0.0, 1.0)


@given(_kind, _unit, _unit, _unit, _unit)
def test_induced_length_symmetric_and_above_chord(kind, a, b, c, d):
    s = SurfaceSpec(kind)
    u0, u1, v0, v1 = s.usable_domain()
    p = np.array([u0 + a * (u1 - u0), v0 + b * (v1 - v0)])
    q = np.array([u0 + c * (u1 - u0), v0 + d * (v1 - v0)])
    if s.kind == "sphere":
        # keep straight segments off the poles
        p[1] *= 0.9
        q[1] *= 0.9
    L1 = induced_length(s, p, q)
    L2 = induced_length(s, q, p)
    assert abs(L1 - L2) <= 1e-12 * max(L1, 1e-300) + 1e-300
    assert L1 >= np.linalg.norm(evaluate(s, p) - evaluate(s, q)) - 1e-9


def test_spec_validation_and_json_roundtrip():
    with pytest.raises(ConfigurationError):
        SurfaceSpec("sphere", {"R": -1.0})
    with pytest.raises(ConfigurationError):
        SurfaceSpec("torus", {"R": 0.5, "r": 0.7})
    with pytest.raises(ConfigurationError):
        SurfaceSpec("klein")
    with pytest.raises(ConfigurationError):
        SurfaceSpec("plane", domain=(0, 0, 0, 1))
    doc = {"kind": "torus", "params": {"R": 2.0, "r": 0.7}, "domain": [0, 6.2832, 0, 6.2832],
           "periodic": [True, True]}
    s = load_surface(doc)
    assert SurfaceSpec.from_dict(s.to_dict()) == s
    assert s.periodic == (True, True)
