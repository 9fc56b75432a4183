"""Nonlinear loop operators: curvature residuals, preconditioner, Jacobian.

All core routines work on plain (..., N, 3) arrays and accept complex input:
the residual is built from polynomial field evaluations, bilinear dot
products and principal square roots, so a complex-step perturbation carries
exact directional derivatives.  The Jacobian below exploits this.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg

from .errors import DegenerateCurveError, LinearSolveError
from .fields import FieldPair
from .loops import DiscreteLoop, fourier_derivative, fourier_jets

# The FFT inside the residual deposits ~1e-16 of roundoff in the imaginary
# channel even for real input, so the step must be large enough that h * F'
# dominates that floor while h^2 * F''' stays below it.  1e-8 balances both
# near 1e-12 relative error.
COMPLEX_STEP = 1e-8
TANGENCY_TOL = 1e-10


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _normalize_rows(pts):
    r = np.sqrt(_dot(pts, pts))[..., np.newaxis]
    return pts / r


@dataclasses.dataclass(frozen=True)
class LoopField:
    """A vector field along a loop, tangent at each loop point."""

    loop: DiscreteLoop
    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.shape != self.loop.points.shape:
            raise ValueError("vector array shape must match the loop")
        pts = self.loop.points
        v = v - _dot(pts, v)[:, np.newaxis] * pts
        object.__setattr__(self, "vectors", v)

    def sup_norm_g(self, pair: FieldPair) -> float:
        eph = np.exp(pair.phi.eval(self.loop.points))
        return float(np.max(np.sqrt(eph * _dot(self.vectors, self.vectors))))


@dataclasses.dataclass(frozen=True)
class FrameCoords:
    """Coefficients of a loop field in the g-orthonormal frame (e1, e2)."""

    a: np.ndarray
    b: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])


# -- core conformal kinematics ----------------------------------------------


def _check_regular(vel):
    speeds = np.sqrt(np.abs(_dot(vel.real, vel.real)))
    if np.min(speeds) < 1e-8:
        raise DegenerateCurveError("loop has (near-)vanishing velocity")


def covariant_accel(pts, vel, acc, gphi):
    """D_t gamma-dot for the conformal metric, from ambient jets."""
    round_part = acc - _dot(pts, acc)[..., np.newaxis] * pts
    dphi_v = _dot(gphi, vel)[..., np.newaxis]
    vv = _dot(vel, vel)[..., np.newaxis]
    return round_part + dphi_v * vel - 0.5 * vv * gphi


def residual_core(pts, pair: FieldPair, magnetic: bool = False, period: float = 1.0):
    """Residual samples -D_t v + (|v|_g) k J v (prescribed) or -D_t v + k J v
    (magnetic, with the stated period of the parametrization)."""
    vel, acc = fourier_jets(pts)
    vel = vel / period
    acc = acc / period**2
    gphi = pair.phi.gradient(pts)
    dv = covariant_accel(pts, vel, acc, gphi)
    kvals = pair.k.eval(pts)[..., np.newaxis]
    jv = np.cross(pts, vel)
    if magnetic:
        return -dv + kvals * jv
    eph = np.exp(pair.phi.eval(pts))
    speed_g = np.sqrt(eph * _dot(vel, vel))[..., np.newaxis]
    return -dv + speed_g * kvals * jv


def frames(pts, pair: FieldPair):
    """g-orthonormal moving frame (e1, e2) and the g-speed along the loop.

    The spectral derivative of on-sphere samples carries a small radial
    component (no discrete product rule); it is projected out so the frame
    is exactly tangent and frame coordinates round-trip without loss.
    """
    vel = fourier_derivative(pts, 1)
    vel = vel - _dot(pts, vel)[..., np.newaxis] * pts
    eph = np.exp(pair.phi.eval(pts))
    speed_g = np.sqrt(eph * _dot(vel, vel))
    e1 = vel / speed_g[..., np.newaxis]
    e2 = np.cross(pts, e1)
    return e1, e2, speed_g, eph


def speed_g_samples(loop: DiscreteLoop, pair: FieldPair) -> np.ndarray:
    _, _, speed, _ = frames(loop.points, pair)
    return speed


def geodesic_curvature_samples(loop: DiscreteLoop, phi_field) -> np.ndarray:
    """Pointwise geodesic curvature of the loop under g = e^phi g_can."""
    pts = loop.points
    vel, acc = fourier_jets(pts)
    _check_regular(vel)
    gphi = phi_field.gradient(pts)
    dv = covariant_accel(pts, vel, acc, gphi)
    eph = np.exp(phi_field.eval(pts))
    jv = np.cross(pts, vel)
    num = eph * _dot(dv, jv)
    den = (np.sqrt(eph * _dot(vel, vel))) ** 3
    return num / den


# -- spec-facing residuals ---------------------------------------------------


def residual_prescribed(loop: DiscreteLoop, pair: FieldPair) -> LoopField:
    """F(gamma) = -D_t v + |v|_g k(gamma) J v; zero iff a discrete solution."""
    vel = fourier_derivative(loop.points, 1)
    _check_regular(vel)
    return LoopField(loop, residual_core(loop.points, pair))


def residual_magnetic(loop: DiscreteLoop, pair: FieldPair, period: float = 1.0) -> LoopField:
    """-D_t v + k(gamma) J v for the loop traversed over the given period."""
    vel = fourier_derivative(loop.points, 1)
    _check_regular(vel)
    return LoopField(loop, residual_core(loop.points, pair, magnetic=True, period=period))


def field_to_frame(field: LoopField, pair: FieldPair) -> FrameCoords:
    e1, e2, _, eph = frames(field.loop.points, pair)
    return FrameCoords(a=eph * _dot(field.vectors, e1), b=eph * _dot(field.vectors, e2))


def frame_to_field(loop: DiscreteLoop, pair: FieldPair, coords: FrameCoords) -> LoopField:
    e1, e2, _, _ = frames(loop.points, pair)
    v = coords.a[:, np.newaxis] * e1 + coords.b[:, np.newaxis] * e2
    return LoopField(loop, v)


# -- the preconditioning operator -D_t^2 + 1 --------------------------------


def _spectral_diff_matrix(n: int) -> np.ndarray:
    """Fourier differentiation matrix for period-1 samples (antisymmetric)."""
    idx = np.arange(n)
    diff = idx[:, np.newaxis] - idx[np.newaxis, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        col = np.where(diff == 0, 0.0,
                       np.pi * (-1.0) ** diff / np.tan(np.pi * diff / n))
    return col


def connection_rate(loop: DiscreteLoop, pair: FieldPair) -> np.ndarray:
    """omega = <D_t e1, e2>_g, the rotation rate of the moving frame."""
    pts = loop.points
    vel = fourier_derivative(pts, 1)
    _check_regular(vel)
    e1, e2, _, eph = frames(pts, pair)
    de1 = fourier_derivative(e1, 1)
    gphi = pair.phi.gradient(pts)
    cov = (de1 - _dot(pts, de1)[:, np.newaxis] * pts
           + 0.5 * (_dot(gphi, vel)[:, np.newaxis] * e1
                    + _dot(gphi, e1)[:, np.newaxis] * vel
                    - _dot(vel, e1)[:, np.newaxis] * gphi))
    return eph * _dot(cov, e2)


def second_order_matrix(loop: DiscreteLoop, pair: FieldPair) -> np.ndarray:
    """Discrete (-D_t^2 + 1) acting on stacked frame coefficients (2N x 2N).

    With the frame rotation rate omega, D_t acts as d/dt + omega J on the
    coefficient pair; the assembled matrix is I - T^2 with T antisymmetric,
    hence symmetric positive definite.
    """
    n = loop.n
    d = _spectral_diff_matrix(n)
    w = np.diag(connection_rate(loop, pair))
    t = np.block([[d, -w], [w, d]])
    return np.eye(2 * n) - t @ t


def apply_second_order(loop: DiscreteLoop, pair: FieldPair, field: LoopField) -> LoopField:
    m = second_order_matrix(loop, pair)
    u = field_to_frame(field, pair).stacked()
    out = m @ u
    n = loop.n
    return frame_to_field(loop, pair, FrameCoords(out[:n], out[n:]))


def solve_second_order(loop: DiscreteLoop, pair: FieldPair, forcing: LoopField) -> LoopField:
    """Solve (-D_t^2 + 1) X = forcing in frame coordinates."""
    m = second_order_matrix(loop, pair)
    rhs = field_to_frame(forcing, pair).stacked()
    try:
        cho = scipy.linalg.cho_factor(m)
        u = scipy.linalg.cho_solve(cho, rhs)
    except scipy.linalg.LinAlgError as exc:
        raise LinearSolveError("frame system not positive definite",
                               condition=float(np.linalg.cond(m))) from exc
    n = loop.n
    return frame_to_field(loop, pair, FrameCoords(u[:n], u[n:]))


def apply_X(loop: DiscreteLoop, pair: FieldPair) -> LoopField:
    """The preconditioned vector field: (-D_t^2 + 1) X = F(gamma).

    X = 0 exactly when the prescribed-curvature residual vanishes.
    """
    return solve_second_order(loop, pair, residual_prescribed(loop, pair))


# -- linearization -----------------------------------------------------------


def residual_frame_map(loop: DiscreteLoop, pair: FieldPair):
    """The residual as a map on stacked frame coefficients of a perturbation.

    The perturbation V = a e1 + b e2 (frame of the base loop) moves the loop
    to normalize(gamma + V); the residual there is expressed in the moved
    loop's own frame.  Accepts batched and complex input.
    """
    base = loop.points
    e1, e2, _, _ = frames(base, pair)

    def rmap(u):
        u = np.asarray(u)
        n = loop.n
        a, b = u[..., :n], u[..., n:]
        v = a[..., np.newaxis] * e1 + b[..., np.newaxis] * e2
        pts = _normalize_rows(base + v)
        res = residual_core(pts, pair)
        f1, f2, _, eph = frames(pts, pair)
        return np.concatenate([eph * _dot(res, f1), eph * _dot(res, f2)], axis=-1)

    return rmap


def jacobian_residual(loop: DiscreteLoop, pair: FieldPair) -> np.ndarray:
    """2N x 2N derivative of the frame residual map, by complex step.

    Every ingredient of the residual extends holomorphically, so the
    imaginary part at step h carries the directional derivative with no
    subtractive cancellation of the real-valued residual itself.
    """
    rmap = residual_frame_map(loop, pair)
    n2 = 2 * loop.n
    directions = 1j * COMPLEX_STEP * np.eye(n2)
    vals = rmap(directions)
    return vals.imag.T / COMPLEX_STEP


def tangent_direction_coords(loop: DiscreteLoop, pair: FieldPair) -> np.ndarray:
    """Frame coefficients of gamma-dot (the reparametrization direction)."""
    _, _, speed, _ = frames(loop.points, pair)
    return np.concatenate([speed, np.zeros_like(speed)])
