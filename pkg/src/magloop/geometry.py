"""Pointwise differential geometry of the conformal sphere (S^2, e^phi g_can).

Points and tangent vectors live in ambient R^3; tangency is enforced by
projection, which keeps the rotation J and the covariant derivative free of
chart switching.  The conformal factor enters through a scalar field object
exposing ``eval``, ``gradient`` and ``laplacian`` (see :mod:`magloop.fields`).
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import BasePointMismatchError, ChartSingularityError, DegenerateCurveError

UNIT_TOL = 1e-12


def _as_vec3(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {w.shape}")
    return w


@dataclasses.dataclass(frozen=True)
class SpherePoint:
    """A point of the unit sphere; renormalized on construction."""

    x: np.ndarray

    def __post_init__(self):
        x = _as_vec3(self.x)
        r = np.linalg.norm(x)
        if r < 1e-6:
            raise ValueError("cannot normalize a near-zero vector to the sphere")
        object.__setattr__(self, "x", x / r)

    def __eq__(self, other):
        return isinstance(other, SpherePoint) and bool(np.all(self.x == other.x))


@dataclasses.dataclass(frozen=True)
class TangentVector:
    """An ambient 3-vector pinned to a base point; projected on construction."""

    base: SpherePoint
    v: np.ndarray

    def __post_init__(self):
        v = _as_vec3(self.v)
        x = self.base.x
        object.__setattr__(self, "v", v - (x @ v) * x)

    def norm_can(self) -> float:
        return float(np.linalg.norm(self.v))


class _ZeroField:
    """Conformal factor of the round metric."""

    def eval(self, points):
        return np.zeros(np.shape(points)[:-1])

    def gradient(self, points):
        return np.zeros_like(np.asarray(points))

    def laplacian(self, points):
        return np.zeros(np.shape(points)[:-1])


@dataclasses.dataclass(frozen=True)
class ConformalMetric:
    """Metric g = e^phi g_can given by its log-conformal factor.

    ``phi`` may be any object with ``eval``/``gradient``/``laplacian`` taking
    arrays of unit points; ``gradient`` must return the tangential gradient
    with respect to the round metric.
    """

    phi: object

    @classmethod
    def round(cls) -> "ConformalMetric":
        return cls(_ZeroField())


ROUND_METRIC = ConformalMetric.round()


def project_tangent(x: SpherePoint, w) -> TangentVector:
    """Project an ambient vector to the tangent plane at ``x``.

    Returns w - (x.w) x attached at x; idempotent.
    """
    return TangentVector(x, _as_vec3(w))


def _check_base(x: SpherePoint, *vecs: TangentVector):
    for u in vecs:
        if not np.allclose(u.base.x, x.x, atol=UNIT_TOL, rtol=0.0):
            raise BasePointMismatchError("tangent vector based at a different point")


def metric_inner(m: ConformalMetric, x: SpherePoint, u: TangentVector, v: TangentVector) -> float:
    """Inner product e^{phi(x)} <u, v> of two tangent vectors at ``x``."""
    _check_base(x, u, v)
    phi = float(m.phi.eval(x.x[np.newaxis, :])[0])
    return float(np.exp(phi) * (u.v @ v.v))


def metric_norm(m: ConformalMetric, x: SpherePoint, u: TangentVector) -> float:
    return float(np.sqrt(metric_inner(m, x, u, u)))


def rotate_J(x: SpherePoint, v: TangentVector) -> TangentVector:
    """Positively oriented pi/2 rotation J(x)v = x cross v.

    Conformal metrics share angles with the round one, so J does not depend
    on the conformal factor; J(Jv) = -v.
    """
    _check_base(x, v)
    return TangentVector(x, np.cross(x.x, v.v))


def covariant_deriv(
    m: ConformalMetric,
    x: SpherePoint,
    xdot: TangentVector,
    V: TangentVector,
    Vdot,
) -> TangentVector:
    """Covariant derivative D_t V along a curve through ``x`` with velocity ``xdot``.

    ``Vdot`` is the ambient parameter-derivative of V along the curve.  The
    round part is the projected ambient derivative; the conformal change adds
    (dphi(xdot) V + dphi(V) xdot - <xdot,V> grad phi) / 2.
    """
    _check_base(x, xdot, V)
    Vdot = _as_vec3(Vdot)
    gp = m.phi.gradient(x.x[np.newaxis, :])[0]
    round_part = Vdot - (x.x @ Vdot) * x.x
    corr = 0.5 * ((gp @ xdot.v) * V.v + (gp @ V.v) * xdot.v - (xdot.v @ V.v) * gp)
    return TangentVector(x, round_part + corr)


def geodesic_curvature(m: ConformalMetric, x: SpherePoint, xdot: TangentVector, xddot) -> float:
    """Signed geodesic curvature <D_t v, Jv>_g / |v|_g^3 from curve jets."""
    _check_base(x, xdot)
    speed = xdot.norm_can()
    if speed < 1e-10:
        raise DegenerateCurveError("geodesic curvature of a degenerate (zero-velocity) jet")
    acc = covariant_deriv(m, x, xdot, xdot, xddot)
    jv = rotate_J(x, xdot)
    num = metric_inner(m, x, acc, jv)
    den = metric_norm(m, x, xdot) ** 3
    return num / den


def gauss_curvature(m: ConformalMetric, x: SpherePoint) -> float:
    """Gauss curvature K = e^{-phi} (1 - lap_can(phi)/2); equals 1 for phi = 0."""
    pt = x.x[np.newaxis, :]
    phi = float(m.phi.eval(pt)[0])
    lap = float(m.phi.laplacian(pt)[0])
    return float(np.exp(-phi) * (1.0 - 0.5 * lap))


def _chart_frame(pole: SpherePoint):
    p = pole.x
    # any stable vector not parallel to the pole
    a = np.array([1.0, 0.0, 0.0]) if abs(p[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = a - (a @ p) * p
    u /= np.linalg.norm(u)
    # w chosen so the chart is orientation preserving for the outward-normal
    # orientation of the sphere (rotation indices then match the planar count)
    w = np.cross(u, p)
    return u, w


def stereographic(x: SpherePoint, pole: SpherePoint) -> np.ndarray:
    """Conformal chart from ``pole``; maps -pole to the origin."""
    p = pole.x
    h = x.x @ p
    if h > 1.0 - 1e-9:
        raise ChartSingularityError("point too close to the projection pole")
    u, w = _chart_frame(pole)
    d = 1.0 - h
    return np.array([(x.x @ u) / d, (x.x @ w) / d])


def stereographic_inverse(xi, pole: SpherePoint) -> SpherePoint:
    """Inverse of :func:`stereographic`."""
    xi = np.asarray(xi, dtype=float)
    u, w = _chart_frame(pole)
    r2 = float(xi @ xi)
    denom = 1.0 + r2
    amb = (2.0 * xi[0] / denom) * u + (2.0 * xi[1] / denom) * w + ((r2 - 1.0) / denom) * pole.x
    return SpherePoint(amb)


def stereographic_batch(points: np.ndarray, pole: SpherePoint) -> np.ndarray:
    """Vectorized chart: (N, 3) unit points -> (N, 2) plane coordinates."""
    p = pole.x
    h = points @ p
    if np.any(h > 1.0 - 1e-9):
        raise ChartSingularityError("a point lies too close to the projection pole")
    u, w = _chart_frame(pole)
    d = (1.0 - h)[..., np.newaxis]
    return np.stack([points @ u, points @ w], axis=-1) / d
