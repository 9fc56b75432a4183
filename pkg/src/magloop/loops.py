"""Discrete closed curves on S^2 sampled at t_i = i/N.

Derivatives come from the trigonometric interpolant (FFT differentiation),
which is spectrally accurate for smooth loops and makes solver residuals
limited by convergence rather than discretization.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json

import numpy as np

from .errors import ChartSingularityError, DegenerateCurveError, UnsupportedLoopError
from .geometry import SpherePoint, stereographic_batch

ISOTROPY_TOL = 1e-7


@dataclasses.dataclass(frozen=True)
class DiscreteLoop:
    """N uniformly parameterized unit points representing a closed curve."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"expected an (N, 3) array, got shape {pts.shape}")
        n = pts.shape[0]
        if n < 16 or n % 2 != 0:
            raise ValueError(f"grid size must be an even integer >= 16, got {n}")
        norms = np.linalg.norm(pts, axis=1)
        if np.any(norms < 1e-6):
            raise ValueError("loop contains a near-zero point")
        # skip the division for already-unit rows so that construction is
        # bit-idempotent (serialized loops re-read to identical arrays)
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            pts = pts / norms[:, np.newaxis]
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def params(self) -> np.ndarray:
        return np.arange(self.n) / self.n


@dataclasses.dataclass(frozen=True)
class LoopJet:
    """First and second parameter derivatives of the trigonometric interpolant."""

    velocity: np.ndarray
    acceleration: np.ndarray


def fourier_derivative(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Spectral derivative along axis -2 of periodic samples on [0, 1)."""
    n = values.shape[-2]
    k = np.fft.fftfreq(n, d=1.0 / n)
    if order % 2 == 1:
        k = k.copy()
        k[n // 2] = 0.0  # Nyquist mode has no well-defined odd derivative
    mult = (2j * np.pi * k) ** order
    spec = np.fft.fft(values, axis=-2) * mult[:, np.newaxis]
    out = np.fft.ifft(spec, axis=-2)
    if not np.iscomplexobj(values):
        out = out.real
    return out


def fourier_jets(points: np.ndarray):
    """(velocity, acceleration) arrays for samples of shape (..., N, 3)."""
    return fourier_derivative(points, 1), fourier_derivative(points, 2)


def differentiate(loop: DiscreteLoop) -> LoopJet:
    vel, acc = fourier_jets(loop.points)
    return LoopJet(velocity=vel, acceleration=acc)


def eval_interp(points: np.ndarray, tnew: np.ndarray, order: int = 0) -> np.ndarray:
    """Evaluate the trigonometric interpolant (or a derivative) off-grid.

    ``points`` is (N, d); ``tnew`` any shape of parameters in R (period 1).
    Direct O(len(tnew) * N) evaluation; fine at solver grid sizes.
    """
    n = points.shape[0]
    tnew = np.asarray(tnew, dtype=float)
    k = np.fft.fftfreq(n, d=1.0 / n).copy()
    coeff = np.fft.fft(points, axis=0) / n
    if order == 0:
        # split the Nyquist mode over +-N/2 so real input stays real
        coeff = np.concatenate([coeff, 0.5 * coeff[n // 2 : n // 2 + 1]], axis=0)
        coeff[n // 2] *= 0.5
        k = np.concatenate([k, [n / 2.0]])
    else:
        k[n // 2] = 0.0
        coeff = coeff * (2j * np.pi * k[:, np.newaxis]) ** order
    phase = np.exp(2j * np.pi * np.outer(tnew.ravel(), k))
    vals = phase @ coeff
    vals = vals.reshape(tnew.shape + (points.shape[1],))
    if not np.iscomplexobj(points):
        vals = vals.real
    return vals


def resample(loop: DiscreteLoop, m: int) -> DiscreteLoop:
    """Trigonometric resampling to an m-point grid."""
    tnew = np.arange(m) / m
    return DiscreteLoop(eval_interp(loop.points, tnew))


def shift(loop: DiscreteLoop, steps: int) -> DiscreteLoop:
    """Grid shift by theta = steps/N, so shift_distance(a, shift(a, s)) finds s/N."""
    return DiscreteLoop(np.roll(loop.points, steps, axis=0))


def iterate(loop: DiscreteLoop, n_fold: int) -> DiscreteLoop:
    """n-fold iterate gamma_n(t) = gamma(n t) on the same grid."""
    idx = (n_fold * np.arange(loop.n)) % loop.n
    return DiscreteLoop(loop.points[idx])


def shift_distance(a: DiscreteLoop, b: DiscreteLoop):
    """Min over grid shifts of the RMS point distance; zero iff same S^1-orbit.

    Returns (distance, best_shift) with best_shift in [0, 1).
    """
    if a.n != b.n:
        b = resample(b, a.n)
    pa, pb = a.points, b.points
    # RMS^2 under shift s: mean |pa_i - pb_{i+s}|^2 = 2 - 2/N sum_i pa_i . pb_{i+s}
    corr = np.zeros(a.n)
    for d in range(3):
        fa = np.fft.fft(pa[:, d])
        fb = np.fft.fft(pb[:, d])
        corr += np.fft.ifft(np.conj(fa) * fb).real
    # corr[s] = sum_i pa_i . pb_{i+s}
    ms = 2.0 - 2.0 * corr / a.n
    s = int(np.argmin(ms))
    return float(np.sqrt(max(ms[s], 0.0))), s / a.n


def orbit_distance(a: DiscreteLoop, b: DiscreteLoop) -> float:
    """Shift distance refined over continuous (sub-grid) parameter shifts.

    Two discretizations of the same orbit generally have base points offset
    by a fraction of a grid cell, leaving a grid shift_distance of order
    speed/(2N); the trigonometric interpolant removes that floor.
    """
    import scipy.optimize

    if a.n != b.n:
        b = resample(b, a.n)
    _, s = shift_distance(a, b)
    ta = a.params

    def rms(theta):
        q = eval_interp(b.points, ta + theta)
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        return float(np.sqrt(np.mean(np.sum((a.points - q) ** 2, axis=1))))

    res = scipy.optimize.minimize_scalar(
        rms, bounds=(s - 1.5 / a.n, s + 1.5 / a.n), method="bounded",
        options={"xatol": 1e-12})
    return min(rms(s), float(res.fun))


def isotropy_order(loop: DiscreteLoop, tol: float = ISOTROPY_TOL) -> int:
    """Largest n dividing N with the loop invariant under a 1/n shift; 1 = prime."""
    for n in range(loop.n, 1, -1):
        if loop.n % n != 0:
            continue
        rolled = np.roll(loop.points, -(loop.n // n), axis=0)
        rms = np.sqrt(np.mean(np.sum((loop.points - rolled) ** 2, axis=1)))
        if rms < tol:
            return n
    return 1


# -- self-intersections ------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class IntersectionResult:
    crossings: tuple  # (i, j, point) for transversal chord crossings
    degenerate_pairs: tuple  # (i, j) overlapping / non-transversal pairs

    @property
    def simple(self) -> bool:
        return not self.crossings and not self.degenerate_pairs


def _on_arc(p, a, b, tol=1e-12):
    """Is unit point p on the minor great-circle arc from a to b?"""
    n = np.cross(a, b)
    return (np.cross(a, p) @ n >= -tol) and (np.cross(p, b) @ n >= -tol) and (p @ (a + b) > 0)


def self_intersections(loop: DiscreteLoop) -> IntersectionResult:
    """Transversal crossings between non-adjacent great-circle chord segments.

    Overlapping (non-transversal) segment pairs are flagged as degenerate
    rather than listed as crossings.
    """
    pts = loop.points
    n = loop.n
    seg_a = pts
    seg_b = np.roll(pts, -1, axis=0)
    gaps = np.arccos(np.clip(np.sum(seg_a * seg_b, axis=1), -1.0, 1.0))
    if np.max(gaps) > np.pi / 4:
        raise UnsupportedLoopError("consecutive points further than pi/4 apart; resample first")
    normals = np.cross(seg_a, seg_b)
    nn = np.linalg.norm(normals, axis=1)

    crossings = []
    degenerate = []
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # adjacent through the wrap
            d = np.cross(normals[i], normals[j])
            dn = np.linalg.norm(d)
            if dn < 1e-9 * max(nn[i] * nn[j], 1e-30):
                # coplanar chords: degenerate only if the arcs actually overlap
                if (_on_arc(seg_a[j], seg_a[i], seg_b[i]) or _on_arc(seg_b[j], seg_a[i], seg_b[i])
                        or _on_arc(seg_a[i], seg_a[j], seg_b[j])):
                    degenerate.append((i, j))
                continue
            for sign in (1.0, -1.0):
                p = sign * d / dn
                if _on_arc(p, seg_a[i], seg_b[i]) and _on_arc(p, seg_a[j], seg_b[j]):
                    crossings.append((i, j, p))
                    break
    return IntersectionResult(tuple(crossings), tuple(degenerate))


# -- rotation index ----------------------------------------------------------


def rotation_index_with_residual(loop: DiscreteLoop, pole: SpherePoint):
    """Winding number of the tangent of the stereographic image, plus the
    residual of rounding the total turning to an integer multiple of 2 pi."""
    dist = np.arccos(np.clip(loop.points @ pole.x, -1.0, 1.0))
    if np.min(dist) < 1e-3:
        raise ChartSingularityError("loop passes too close to the projection pole")
    plane = stereographic_batch(loop.points, pole)
    vel = fourier_derivative(plane, 1)
    speeds = np.linalg.norm(vel, axis=1)
    if np.min(speeds) < 1e-10 * np.max(speeds):
        raise DegenerateCurveError("projected tangent vanishes; cannot unwind the angle")
    ang = np.arctan2(vel[:, 1], vel[:, 0])
    diffs = np.diff(np.concatenate([ang, ang[:1]]))
    diffs = (diffs + np.pi) % (2.0 * np.pi) - np.pi
    total = float(np.sum(diffs))
    idx = int(np.round(total / (2.0 * np.pi)))
    return idx, abs(total / (2.0 * np.pi) - idx)


def rotation_index(loop: DiscreteLoop, pole: SpherePoint) -> int:
    return rotation_index_with_residual(loop, pole)[0]


# -- enclosed area -----------------------------------------------------------

# deterministic candidate rotations used to move a loop into generic position
_ROT_CANDIDATES = [
    np.eye(3),
]


def _rotation_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


for _i in range(1, 12):
    _ROT_CANDIDATES.append(
        _rotation_from_axis_angle([np.cos(2.4 * _i), np.sin(2.4 * _i), 0.6], 0.9 + 0.37 * _i))
# tilts about the coordinate axes cover loops that the skew candidates miss
# (e.g. small latitude circles close to a pole)
for _ax in ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]):
    for _ang in np.arange(0.4, 3.0, 0.4):
        _ROT_CANDIDATES.append(_rotation_from_axis_angle(_ax, float(_ang)))


def generic_rotation(points: np.ndarray, pole_margin: float = 0.05,
                     need_theta_variation: bool = False) -> np.ndarray:
    """A rotation keeping the loop away from the coordinate poles (and, if
    requested, with nondegenerate latitude variation)."""
    for rot in _ROT_CANDIDATES:
        q = points @ rot.T
        if np.max(np.abs(q[:, 2])) > 1.0 - pole_margin:
            continue
        if need_theta_variation and np.ptp(q[:, 2]) < 1e-4:
            continue
        return rot
    raise ChartSingularityError("no generic rotation found for this loop")


def enclosed_area(loop: DiscreteLoop) -> float:
    """Area of the disk on the positive side (side of J gamma-dot), in (0, 4 pi).

    Uses the spherical line-integral formula: with alpha = (1 - cos theta) dphi
    one has d alpha = dA, so the integral of alpha along the loop is the area
    of the positive-side region modulo 4 pi.  Requires a simple loop.
    """
    inter = self_intersections(loop)
    if not inter.simple:
        raise UnsupportedLoopError("enclosed area is defined for simple loops only")
    rot = generic_rotation(loop.points)
    pts = loop.points @ rot.T
    vel = fourier_derivative(pts, 1)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    phidot = (x * vel[:, 1] - y * vel[:, 0]) / (x * x + y * y)
    integral = float(np.mean((1.0 - z) * phidot))
    area = integral % (4.0 * np.pi)
    return area


# -- serialization -----------------------------------------------------------


def loop_to_csv(loop: DiscreteLoop) -> str:
    """CSV with header t,x,y,z; 17 significant digits; LF endings."""
    buf = io.StringIO()
    buf.write("t,x,y,z\n")
    for i, p in enumerate(loop.points):
        t = i / loop.n
        buf.write("%.17g,%.17g,%.17g,%.17g\n" % (t, p[0], p[1], p[2]))
    return buf.getvalue()


def loop_from_csv(text: str) -> DiscreteLoop:
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if not lines or lines[0].strip() != "t,x,y,z":
        raise ValueError("expected CSV header 't,x,y,z'")
    rows = [tuple(float(v) for v in ln.split(",")) for ln in lines[1:]]
    pts = np.array([[r[1], r[2], r[3]] for r in rows])
    return DiscreteLoop(pts)


def loop_checksum(loop: DiscreteLoop) -> str:
    return hashlib.sha256(loop_to_csv(loop).encode()).hexdigest()[:16]


def loop_to_json(loop: DiscreteLoop, metadata: dict | None = None) -> str:
    doc = {
        "n": loop.n,
        "points": [[float(v) for v in p] for p in loop.points],
        "checksum": loop_checksum(loop),
        "metadata": metadata or {},
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def loop_from_json(text: str) -> DiscreteLoop:
    doc = json.loads(text)
    loop = DiscreteLoop(np.array(doc["points"], dtype=float))
    if "checksum" in doc and doc["checksum"] != loop_checksum(loop):
        raise ValueError("loop JSON checksum mismatch")
    return loop
