"""Pointwise geometry checks against closed forms on latitude circles."""

import numpy as np
import pytest

from magloop import geometry
from magloop.errors import BasePointMismatchError, ChartSingularityError
from magloop.fields import SphericalField
from magloop.geometry import (
    ROUND_METRIC,
    ConformalMetric,
    SpherePoint,
    TangentVector,
    covariant_deriv,
    gauss_curvature,
    geodesic_curvature,
    metric_inner,
    metric_norm,
    project_tangent,
    rotate_J,
    stereographic,
    stereographic_batch,
    stereographic_inverse,
)

RNG = np.random.default_rng(7)


def random_point():
    v = RNG.normal(size=3)
    return SpherePoint(v)


def test_sphere_point_normalizes():
    p = SpherePoint(np.array([0.0, 0.0, 2.5]))
    assert np.allclose(p.x, [0, 0, 1])
    with pytest.raises(ValueError):
        SpherePoint(np.zeros(3))


def test_tangent_projection_idempotent():
    p = random_point()
    w = RNG.normal(size=3)
    v = project_tangent(p, w)
    assert abs(p.x @ v.v) < 1e-14
    v2 = project_tangent(p, v.v)
    assert np.allclose(v.v, v2.v)


def test_metric_inner_round_is_euclidean():
    p = random_point()
    u = project_tangent(p, RNG.normal(size=3))
    v = project_tangent(p, RNG.normal(size=3))
    assert metric_inner(ROUND_METRIC, p, u, v) == pytest.approx(u.v @ v.v)


def test_metric_inner_conformal_scales():
    phi = SphericalField.from_terms([(1, 0, 0.4), (1, 1, -0.2)])
    m = ConformalMetric(phi)
    p = random_point()
    u = project_tangent(p, RNG.normal(size=3))
    expected = np.exp(phi.eval(p.x[np.newaxis, :])[0]) * (u.v @ u.v)
    assert metric_inner(m, p, u, u) == pytest.approx(expected, rel=1e-14)
    assert metric_norm(m, p, u) == pytest.approx(np.sqrt(expected), rel=1e-14)


def test_rotate_J_is_quarter_turn():
    p = random_point()
    v = project_tangent(p, RNG.normal(size=3))
    jv = rotate_J(p, v)
    assert jv.v @ v.v == pytest.approx(0.0, abs=1e-14)
    assert np.linalg.norm(jv.v) == pytest.approx(np.linalg.norm(v.v), rel=1e-14)
    jjv = rotate_J(p, jv)
    assert np.allclose(jjv.v, -v.v)


def test_base_point_mismatch_raises():
    p, q = random_point(), random_point()
    v = project_tangent(q, RNG.normal(size=3))
    with pytest.raises(BasePointMismatchError):
        rotate_J(p, v)


def test_great_circle_is_round_geodesic():
    # gamma(t) = (cos t, sin t, 0): D_t gamma-dot = 0 under the round metric
    p = SpherePoint(np.array([1.0, 0.0, 0.0]))
    xdot = project_tangent(p, np.array([0.0, 1.0, 0.0]))
    acc = covariant_deriv(ROUND_METRIC, p, xdot, xdot, np.array([-1.0, 0.0, 0.0]))
    assert np.linalg.norm(acc.v) < 1e-14


def latitude_jet(theta, t):
    """Jet of gamma(t) = (sin th cos t, sin th sin t, cos th)."""
    st, ct = np.sin(theta), np.cos(theta)
    p = np.array([st * np.cos(t), st * np.sin(t), ct])
    v = np.array([-st * np.sin(t), st * np.cos(t), 0.0])
    a = np.array([-st * np.cos(t), -st * np.sin(t), 0.0])
    return SpherePoint(p), v, a


@pytest.mark.parametrize("theta", [0.3, np.pi / 4, 1.2, np.pi / 2])
def test_latitude_circle_curvature(theta):
    # closed form: k_g = cot(theta) for the circle at polar angle theta,
    # traversed with J gamma-dot pointing away from the north pole
    p, v, a = latitude_jet(theta, 0.37)
    xdot = project_tangent(p, v)
    k = geodesic_curvature(ROUND_METRIC, p, xdot, a)
    assert k == pytest.approx(1.0 / np.tan(theta), abs=1e-12)


def test_constant_conformal_shift_scales_curvature():
    # under g = e^c g_can lengths scale by e^{c/2}, so k_g scales by e^{-c/2}
    c = 0.8
    m = ConformalMetric(SphericalField.constant(c))
    theta = 0.9
    p, v, a = latitude_jet(theta, 1.1)
    xdot = project_tangent(p, v)
    k = geodesic_curvature(m, p, xdot, a)
    assert k == pytest.approx(np.exp(-c / 2) / np.tan(theta), rel=1e-12)


def test_covariant_deriv_conformal_vs_finite_difference():
    # compare the conformal correction against a metric-compatibility check:
    # d/dt <V, V>_g = 2 <D_t V, V>_g along a curve
    phi = SphericalField.from_terms([(1, 1, 0.3), (2, -1, 0.2), (2, 2, -0.15)])
    m = ConformalMetric(phi)

    def curve(t):
        raw = np.array([np.cos(t), np.sin(t), 0.4 * np.sin(2 * t) + 0.1])
        return raw / np.linalg.norm(raw)

    def vfield(t):
        p = curve(t)
        w = np.array([np.sin(t), 0.3, np.cos(3 * t)])
        return w - (p @ w) * p

    t0, h = 0.6, 1e-6
    p = SpherePoint(curve(t0))
    xdot_amb = (curve(t0 + h) - curve(t0 - h)) / (2 * h)
    vdot_amb = (vfield(t0 + h) - vfield(t0 - h)) / (2 * h)
    xdot = project_tangent(p, xdot_amb)
    V = TangentVector(p, vfield(t0))
    dtv = covariant_deriv(m, p, xdot, V, vdot_amb)

    def gnorm2(t):
        q = curve(t)
        w = vfield(t)
        return np.exp(phi.eval(q[np.newaxis, :])[0]) * (w @ w)

    lhs = (gnorm2(t0 + h) - gnorm2(t0 - h)) / (2 * h)
    rhs = 2.0 * metric_inner(m, p, dtv, V)
    assert lhs == pytest.approx(rhs, rel=1e-6, abs=1e-8)


def test_gauss_curvature_round():
    assert gauss_curvature(ROUND_METRIC, random_point()) == pytest.approx(1.0)


def test_gauss_curvature_constant_factor():
    c = 0.5
    m = ConformalMetric(SphericalField.constant(c))
    assert gauss_curvature(m, random_point()) == pytest.approx(np.exp(-c), rel=1e-14)


def test_gauss_curvature_linear_factor():
    # phi = eps*z: lap phi = -2 eps z, so K = e^{-eps z} (1 + eps z)
    eps = 0.3
    m = ConformalMetric(SphericalField.from_terms([(1, 0, eps)]))
    p = random_point()
    z = p.x[2]
    assert gauss_curvature(m, p) == pytest.approx(np.exp(-eps * z) * (1 + eps * z), rel=1e-13)


def test_stereographic_round_trip():
    pole = random_point()
    for _ in range(20):
        p = random_point()
        if p.x @ pole.x > 0.95:
            continue
        xi = stereographic(p, pole)
        q = stereographic_inverse(xi, pole)
        assert np.allclose(q.x, p.x, atol=1e-13)


def test_stereographic_antipode_to_origin():
    pole = SpherePoint(np.array([0.0, 0.0, 1.0]))
    xi = stereographic(SpherePoint(np.array([0.0, 0.0, -1.0])), pole)
    assert np.allclose(xi, [0, 0])


def test_stereographic_pole_raises():
    pole = random_point()
    with pytest.raises(ChartSingularityError):
        stereographic(pole, pole)


def test_stereographic_batch_matches_scalar():
    pole = random_point()
    pts = []
    while len(pts) < 10:
        p = random_point()
        if p.x @ pole.x < 0.9:
            pts.append(p.x)
    pts = np.array(pts)
    batch = stereographic_batch(pts, pole)
    single = np.array([stereographic(SpherePoint(p), pole) for p in pts])
    assert np.allclose(batch, single, atol=1e-14)


def test_stereographic_is_conformal():
    # push-forwards of an orthonormal tangent pair stay orthogonal and equal in length
    pole = random_point()
    p = random_point()
    if p.x @ pole.x > 0.9:
        p = SpherePoint(-p.x)
    a = project_tangent(p, RNG.normal(size=3))
    u = a.v / np.linalg.norm(a.v)
    w = np.cross(p.x, u)
    h = 1e-6

    def push(direction):
        fwd = stereographic(SpherePoint(p.x + h * direction), pole)
        bwd = stereographic(SpherePoint(p.x - h * direction), pole)
        return (fwd - bwd) / (2 * h)

    du, dw = push(u), push(w)
    assert du @ dw == pytest.approx(0.0, abs=1e-5 * (du @ du))
    assert np.linalg.norm(du) == pytest.approx(np.linalg.norm(dw), rel=1e-5)
