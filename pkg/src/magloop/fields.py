"""Scalar fields on S^2 as real spherical-harmonic expansions.

The basis is Schmidt semi-normalized without the Condon-Shortley phase, so the
first few basis functions are exactly 1, z, x, y.  Every term is a polynomial
in the ambient coordinates, which keeps evaluation, ambient gradients and the
Laplace-Beltrami operator exact, and makes all of them well defined for
complex-perturbed inputs (used for complex-step linearization downstream).
"""

from __future__ import annotations

import dataclasses
import math
from typing import Iterable, Sequence

import numpy as np
import scipy.optimize

from .errors import MagloopError

__all__ = [
    "SphericalField",
    "FieldPair",
    "FieldInfimum",
    "eval_field",
    "grad_field",
    "laplacian_field",
    "field_infimum",
    "homotopy_fields",
]

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
# covering-radius constant for the Fibonacci lattice, with safety headroom
_COVER_CONST = 3.0


def _schmidt_norm(l: int, m: int) -> float:
    if m == 0:
        return 1.0
    return math.sqrt(2.0 * math.factorial(l - m) / math.factorial(l + m))


def _legendre_q(z, l: int, m: int):
    """Q_l^m(z) = P_l^m(z) / (1-z^2)^{m/2} and its z-derivative.

    Polynomial in z, so safe for complex input.  No Condon-Shortley phase.
    """
    # double factorial (2m-1)!!
    qmm = 1.0
    for i in range(1, m + 1):
        qmm *= 2 * i - 1
    q_prev = np.full_like(z, qmm)
    dq_prev = np.zeros_like(z)
    if l == m:
        return q_prev, dq_prev
    q_cur = (2 * m + 1) * z * q_prev
    dq_cur = (2 * m + 1) * q_prev
    for ll in range(m + 2, l + 1):
        q_next = ((2 * ll - 1) * z * q_cur - (ll - 1 + m) * q_prev) / (ll - m)
        dq_next = ((2 * ll - 1) * (q_cur + z * dq_cur) - (ll - 1 + m) * dq_prev) / (ll - m)
        q_prev, q_cur = q_cur, q_next
        dq_prev, dq_cur = dq_cur, dq_next
    return q_cur, dq_cur


def _cos_sin(x, y, m: int):
    """c_k + i s_k = (x + i y)^k for k = 0..m, returned as two lists."""
    c = [np.ones_like(x)]
    s = [np.zeros_like(x)]
    for _ in range(m):
        c_next = x * c[-1] - y * s[-1]
        s_next = x * s[-1] + y * c[-1]
        c.append(c_next)
        s.append(s_next)
    return c, s


@dataclasses.dataclass(frozen=True)
class SphericalField:
    """Real spherical-harmonic expansion sum_lm coeff * B_lm."""

    terms: tuple

    def __post_init__(self):
        clean = []
        for l, m, coeff in self.terms:
            l, m = int(l), int(m)
            if l < 0 or abs(m) > l:
                raise ValueError(f"invalid harmonic index (l={l}, m={m})")
            clean.append((l, m, float(coeff)))
        object.__setattr__(self, "terms", tuple(clean))

    @classmethod
    def constant(cls, c: float) -> "SphericalField":
        return cls(((0, 0, float(c)),))

    @classmethod
    def zero(cls) -> "SphericalField":
        return cls(())

    @classmethod
    def from_terms(cls, terms: Iterable[Sequence]) -> "SphericalField":
        return cls(tuple((t[0], t[1], t[2]) for t in terms))

    @property
    def lmax(self) -> int:
        return max((l for l, _, _ in self.terms), default=0)

    def is_zero(self) -> bool:
        return all(c == 0.0 for _, _, c in self.terms)

    def scaled(self, s: float) -> "SphericalField":
        return SphericalField(tuple((l, m, s * c) for l, m, c in self.terms))

    def plus_constant(self, a: float) -> "SphericalField":
        return SphericalField(self.terms + ((0, 0, float(a)),))

    # -- evaluation ---------------------------------------------------------

    def eval(self, points):
        """Field values at unit points of shape (..., 3)."""
        points = np.asarray(points)
        x, y, z = points[..., 0], points[..., 1], points[..., 2]
        out = np.zeros_like(z)
        for l, m, coeff in self.terms:
            am = abs(m)
            q, _ = _legendre_q(z, l, am)
            c, s = _cos_sin(x, y, am)
            trig = c[am] if m >= 0 else s[am]
            out = out + coeff * _schmidt_norm(l, am) * q * trig
        return out

    def gradient_ambient(self, points):
        """Ambient partials of the polynomial representative, shape (..., 3)."""
        points = np.asarray(points)
        x, y, z = points[..., 0], points[..., 1], points[..., 2]
        out = np.zeros_like(points)
        for l, m, coeff in self.terms:
            am = abs(m)
            q, dq = _legendre_q(z, l, am)
            c, s = _cos_sin(x, y, am)
            w = coeff * _schmidt_norm(l, am)
            if m >= 0:
                if am > 0:
                    out[..., 0] += w * am * c[am - 1] * q
                    out[..., 1] += -w * am * s[am - 1] * q
                out[..., 2] += w * c[am] * dq
            else:
                out[..., 0] += w * am * s[am - 1] * q
                out[..., 1] += w * am * c[am - 1] * q
                out[..., 2] += w * s[am] * dq
        return out

    def gradient(self, points):
        """Tangential (round) gradient at unit points; (..., 3)."""
        points = np.asarray(points)
        g = self.gradient_ambient(points)
        radial = np.sum(points * g, axis=-1, keepdims=True)
        return g - radial * points

    def laplacian(self, points):
        """Laplace-Beltrami values: each term is a -l(l+1) eigenfunction."""
        points = np.asarray(points)
        x, y, z = points[..., 0], points[..., 1], points[..., 2]
        out = np.zeros_like(z)
        for l, m, coeff in self.terms:
            am = abs(m)
            q, _ = _legendre_q(z, l, am)
            c, s = _cos_sin(x, y, am)
            trig = c[am] if m >= 0 else s[am]
            out = out + (-l * (l + 1)) * coeff * _schmidt_norm(l, am) * q * trig
        return out


def eval_field(f: SphericalField, x) -> np.ndarray:
    return f.eval(x)


def grad_field(f: SphericalField, x) -> np.ndarray:
    return f.gradient(x)


def laplacian_field(f: SphericalField, x) -> np.ndarray:
    return f.laplacian(x)


# -- certified infimum ------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class FieldInfimum:
    """Certified lower bound: value <= inf f <= value + gap."""

    value: float
    gap: float

    def __float__(self):
        return self.value


def _fibonacci_chunks(n: int, chunk: int = 1 << 20):
    """Yield (k, 3) chunks of an n-point Fibonacci lattice on the sphere."""
    for start in range(0, n, chunk):
        idx = np.arange(start, min(start + chunk, n), dtype=float)
        z = 1.0 - (2.0 * idx + 1.0) / n
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        ang = _GOLDEN_ANGLE * idx
        yield np.stack([r * np.cos(ang), r * np.sin(ang), z], axis=-1)


def _hessian_bound(f: SphericalField) -> float:
    # Bernstein-type bound per Schmidt term (|B_lm| <= 1), times safety 2
    return 2.0 * sum(abs(c) * l * l for l, _, c in f.terms if l >= 1)


def _polish_min(f: SphericalField, x0: np.ndarray) -> float:
    """Local descent from x0, parameterized in the tangent plane."""
    p = x0 / np.linalg.norm(x0)
    a = np.array([1.0, 0.0, 0.0]) if abs(p[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = a - (a @ p) * p
    u /= np.linalg.norm(u)
    w = np.cross(p, u)

    def func(ab):
        q = p + ab[0] * u + ab[1] * w
        q = q / np.linalg.norm(q)
        return float(f.eval(q[np.newaxis, :])[0])

    res = scipy.optimize.minimize(func, np.zeros(2), method="Nelder-Mead",
                                  options={"xatol": 1e-10, "fatol": 1e-14})
    return float(res.fun)


def field_infimum(f: SphericalField, target_gap: float = 1e-5) -> FieldInfimum:
    """Certified lower bound for min f over the sphere.

    Dense lattice sampling with a first-order-plus-curvature margin per
    sample, refined by local descent in the best basin.  The lattice spacing
    depends only on ``target_gap`` so that the bound map is affine in the
    field (the homotopy k_t then certifies exactly).
    """
    const = sum(c for l, _, c in f.terms if l == 0)
    hess = _hessian_bound(f)
    if hess == 0.0:
        return FieldInfimum(const, 0.0)

    h = math.sqrt(2.0 * target_gap / 3.0)
    n = int((_COVER_CONST / h) ** 2) + 1

    lower = math.inf
    best_val = math.inf
    best_pt = None
    margin2 = 0.5 * hess * h * h
    for pts in _fibonacci_chunks(n):
        vals = f.eval(pts)
        grads = f.gradient(pts)
        gnorm = np.sqrt(np.sum(grads * grads, axis=-1))
        bound = vals - gnorm * h - margin2
        i = int(np.argmin(bound))
        if bound[i] < lower:
            lower = float(bound[i])
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val = float(vals[j])
            best_pt = pts[j].copy()

    refined = min(best_val, _polish_min(f, best_pt))
    return FieldInfimum(lower, refined - lower)


# -- homotopy of (phi, k) pairs ---------------------------------------------


@dataclasses.dataclass(frozen=True)
class FieldPair:
    """Conformal factor phi, curvature prescription k, and a certified inf k."""

    phi: SphericalField
    k: SphericalField
    k_inf: float
    inf_gap: float = 0.0

    @classmethod
    def build(cls, phi: SphericalField, k: SphericalField,
              target_gap: float = 1e-5, require_positive: bool = True) -> "FieldPair":
        bound = field_infimum(k, target_gap=target_gap)
        if require_positive and bound.value <= 0.0:
            raise MagloopError(
                f"curvature prescription is not certified positive (k_inf <= {bound.value:.3g})")
        return cls(phi=phi, k=k, k_inf=bound.value, inf_gap=bound.gap)

    @classmethod
    def round_constant(cls, k0: float, phi: SphericalField | None = None) -> "FieldPair":
        phi = phi if phi is not None else SphericalField.zero()
        return cls(phi=phi, k=SphericalField.constant(k0), k_inf=float(k0))


def homotopy_fields(pair: FieldPair, t: float) -> FieldPair:
    """Deformation (phi_t, k_t) = (t phi, (1-t) inf k + t k) for t in [0, 1].

    k_t >= k_inf > 0 along the whole deformation.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"homotopy parameter t={t} outside [0, 1]")
    if pair.k_inf <= 0.0:
        raise MagloopError("homotopy requires a certified positive k_inf")
    phi_t = pair.phi.scaled(t)
    k_t = pair.k.scaled(t).plus_constant((1.0 - t) * pair.k_inf)
    return FieldPair(phi=phi_t, k=k_t, k_inf=pair.k_inf, inf_gap=pair.inf_gap)
