"""Finding closed solutions: Newton on loops, shooting, and continuation."""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np
import scipy.optimize

from .errors import (
    CollapseError,
    LinearSolveError,
    NonconvergenceError,
    SearchFailureError,
    SectionError,
)
from .fields import FieldPair, SphericalField, homotopy_fields
from .loops import DiscreteLoop, eval_interp, fourier_derivative
from . import operators


@dataclasses.dataclass
class SolverOptions:
    newton_tol: float = 1e-10
    max_iters: int = 50
    damping: float = 0.5
    n: int = 128
    svd_truncation: float = 1e-8
    phase_weight: float = 1.0
    # continuation step control
    dt_init: float = 0.05
    dt_min: float = 1e-4
    dt_max: float = 0.1

    def __post_init__(self):
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")
        if self.n < 16 or self.n % 2 != 0:
            raise ValueError("grid size must be an even integer >= 16")


@dataclasses.dataclass
class OrbitSolution:
    """A converged loop plus solver metadata; the report is attached by verify."""

    loop: DiscreteLoop
    pair: FieldPair
    residual_norm: float
    speed: float
    newton_iters: int
    kind: str = "prescribed"  # or "magnetic"
    energy: float | None = None
    period: float = 1.0
    report: object = None

    def speed_variation(self) -> float:
        s = operators.speed_g_samples(self.loop, self.pair)
        return float((np.max(s) - np.min(s)) / np.mean(s))


@dataclasses.dataclass
class ContinuationPath:
    samples: list  # of (t, OrbitSolution)
    step_history: list  # of (t_attempt, dt, iters, accepted)
    status: str  # "reached" or "blocked"
    blocked_t: float | None = None


# -- parametrization control -------------------------------------------------


def uniform_speed_resample(points: np.ndarray, pair: FieldPair) -> np.ndarray:
    """Resample so the g-speed is constant, keeping the t=0 base point."""
    n = points.shape[0]
    vel = fourier_derivative(points, 1)
    eph = np.exp(pair.phi.eval(points))
    speed = np.sqrt(eph * np.sum(vel * vel, axis=-1))
    total = float(np.mean(speed))
    if np.max(speed) - np.min(speed) < 1e-13 * total:
        return points

    # spectral antiderivative of the speed
    shat = np.fft.fft(speed) / n
    k = np.fft.fftfreq(n, d=1.0 / n)
    dense = 8 * n
    td = np.arange(dense) / dense
    phase = np.exp(2j * np.pi * np.outer(td, k))
    osc = np.zeros(n, dtype=complex)
    nz = k != 0
    osc[nz] = shat[nz] / (2j * np.pi * k[nz])
    ell = total * td + (phase @ osc - np.sum(osc)).real

    targets = total * np.arange(n) / n
    tnew = np.interp(targets, ell, td)
    # two Newton corrections on the interpolant
    for _ in range(2):
        ph = np.exp(2j * np.pi * np.outer(tnew, k))
        ell_t = total * tnew + (ph @ osc - np.sum(osc)).real
        s_t = (ph @ shat).real
        tnew = tnew - (ell_t - targets) / s_t
    tnew[0] = 0.0
    out = eval_interp(points, tnew)
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def _check_collapse(points: np.ndarray):
    vel = fourier_derivative(points, 1)
    sp = np.linalg.norm(vel, axis=1)
    if np.min(sp) < 1e-6 * np.mean(sp):
        raise CollapseError("loop parametrization degenerated (speed collapse)")


# -- Newton on loops ---------------------------------------------------------


def _residual_sup(loop: DiscreteLoop, pair: FieldPair) -> float:
    return operators.residual_prescribed(loop, pair).sup_norm_g(pair)


def _truncated_lstsq(a: np.ndarray, b: np.ndarray, truncation: float) -> np.ndarray:
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    keep = s > truncation * s[0]
    coef = (u.T @ b)[keep] / s[keep]
    return vt[keep].T @ coef


def _filtered_steps(a: np.ndarray, b: np.ndarray, truncation: float):
    """Yield Gauss-Newton updates with increasing Tikhonov damping.

    The first candidate is the plain truncated least-squares step (quadratic
    convergence near a solution); later ones damp the nearly-singular
    directions that arise when the round-sphere circle family is only weakly
    broken, where the undamped step badly overshoots.
    """
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    utb = u.T @ b
    keep = s > truncation * s[0]
    coef = np.where(keep, utb / np.where(keep, s, 1.0), 0.0)
    yield vt.T @ coef
    lam = 1e-7 * s[0]
    for _ in range(8):
        yield vt.T @ (utb * s / (s * s + lam * lam))
        lam *= 10.0


def newton_solve(guess: DiscreteLoop, pair: FieldPair,
                 opts: SolverOptions | None = None) -> OrbitSolution:
    """Damped Gauss-Newton on the prescribed-curvature residual.

    The update is computed in frame coordinates with an integral phase
    condition pinning the reparametrization gauge; each accepted step
    renormalizes the points to the sphere and the parametrization to uniform
    g-speed.  Converges to residual sup-norm <= newton_tol or raises.
    """
    opts = opts or SolverOptions(n=guess.n)
    loop = DiscreteLoop(uniform_speed_resample(guess.points, pair))
    rnorm = _residual_sup(loop, pair)

    def merit(lp):
        # line-search acceptance uses the smooth L2 g-norm; the sup norm can
        # plateau along a perfectly good descent direction
        f = operators.residual_prescribed(lp, pair)
        eph = np.exp(pair.phi.eval(lp.points))
        return float(np.sqrt(np.mean(eph * np.sum(f.vectors**2, axis=-1))))

    m0 = merit(loop)
    iters = 0
    while rnorm > opts.newton_tol:
        if iters >= opts.max_iters:
            raise NonconvergenceError(
                f"Newton did not reach tol={opts.newton_tol:g} in {opts.max_iters} "
                f"iterations (residual {rnorm:.3e})", residual_norm=rnorm)
        _check_collapse(loop.points)
        jac = operators.jacobian_residual(loop, pair)
        rmap = operators.residual_frame_map(loop, pair)
        r0 = rmap(np.zeros(2 * loop.n))
        tau = operators.tangent_direction_coords(loop, pair)
        a = np.vstack([jac, opts.phase_weight * tau[np.newaxis, :]])
        b = -np.concatenate([r0, [0.0]])
        e1, e2, _, _ = operators.frames(loop.points, pair)
        n = loop.n

        accepted = None
        for cand_idx, du in enumerate(_filtered_steps(a, b, opts.svd_truncation)):
            vec = du[:n, np.newaxis] * e1 + du[n:, np.newaxis] * e2
            step = 1.0
            # backtrack deeply along the exact direction; damped fallback
            # directions get only a shallow search
            for _ in range(12 if cand_idx == 0 else 2):
                cand = loop.points + step * vec
                cand = cand / np.linalg.norm(cand, axis=1, keepdims=True)
                cand = uniform_speed_resample(cand, pair)
                cand_loop = DiscreteLoop(cand)
                new_merit = merit(cand_loop)
                if new_merit < m0:
                    accepted = (cand_loop, new_merit)
                    break
                step *= opts.damping
            if accepted is not None:
                break
        if accepted is None:
            raise NonconvergenceError(
                f"line search stalled at residual {rnorm:.3e}", residual_norm=rnorm)
        loop, m0 = accepted
        rnorm = _residual_sup(loop, pair)
        iters += 1

    speed = float(np.mean(operators.speed_g_samples(loop, pair)))
    return OrbitSolution(loop=loop, pair=pair, residual_norm=rnorm,
                         speed=speed, newton_iters=iters)


# -- seed circles ------------------------------------------------------------


_CUBE_VERTICES = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1)
                           for sz in (-1, 1)], dtype=float) / np.sqrt(3.0)


def _spread_centers(count: int) -> np.ndarray:
    if count <= 8:
        return _CUBE_VERTICES[:count]
    idx = np.arange(count, dtype=float)
    z = 1.0 - (2.0 * idx + 1.0) / count
    r = np.sqrt(1.0 - z * z)
    ang = np.pi * (3.0 - np.sqrt(5.0)) * idx
    return np.stack([r * np.cos(ang), r * np.sin(ang), z], axis=-1)


def _circle_at(c: np.ndarray, rho: float, n: int) -> DiscreteLoop:
    a = np.array([1.0, 0.0, 0.0]) if abs(c[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = a - (a @ c) * c
    u /= np.linalg.norm(u)
    w = np.cross(c, u)
    t = np.arange(n) / n
    pts = (np.cos(rho) * c[np.newaxis, :]
           + np.sin(rho) * (np.outer(np.cos(2 * np.pi * t), u)
                            + np.outer(np.sin(2 * np.pi * t), w)))
    return DiscreteLoop(pts)


def _family_obstruction(pair: FieldPair, centers: np.ndarray, t_probe: float,
                        n: int = 64) -> np.ndarray:
    """Size of the residual component along the circle family's drift modes.

    At small deformation parameter the solutions of the deformed problem
    branch from circles whose centers annihilate this projection; centers at
    nonzero local minima trap Gauss-Newton at a non-solution.  The three
    rotation fields a x gamma span the drift (center motion plus phase).
    """
    ft = homotopy_fields(pair, t_probe)
    rho = np.arctan2(1.0, pair.k_inf)
    out = np.empty(len(centers))
    eye = np.eye(3)
    for i, c in enumerate(centers):
        loop = _circle_at(c, rho, n)
        f = operators.residual_prescribed(loop, ft).vectors
        w = np.stack([np.cross(eye[j], loop.points) for j in range(3)])
        gram = np.einsum("ikd,jkd->ij", w, w) / n
        proj = np.einsum("ikd,kd->i", w, f) / n
        out[i] = float(np.sqrt(max(proj @ np.linalg.solve(gram, proj), 0.0)))
    return out


def _drift_obstruction_fn(pair: FieldPair, t_probe: float, n: int):
    """Scalar obstruction using only the two center-drift modes (phase mode
    excluded), as a function of the center direction."""
    ft = homotopy_fields(pair, t_probe)
    rho = np.arctan2(1.0, pair.k_inf)

    def fn(c):
        c = np.asarray(c, dtype=float)
        c = c / np.linalg.norm(c)
        loop = _circle_at(c, rho, n)
        f = operators.residual_prescribed(loop, ft).vectors
        a = np.array([1.0, 0.0, 0.0]) if abs(c[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        a1 = a - (a @ c) * c
        a1 /= np.linalg.norm(a1)
        a2 = np.cross(c, a1)
        w = np.stack([np.cross(a1, loop.points), np.cross(a2, loop.points)])
        gram = np.einsum("ikd,jkd->ij", w, w) / n
        proj = np.einsum("ikd,kd->i", w, f) / n
        return float(np.sqrt(max(proj @ np.linalg.solve(gram, proj), 0.0)))

    return fn


def _polish_center(fn, c0: np.ndarray) -> tuple:
    """Descend the drift obstruction from c0; returns (center, value)."""
    th = np.arccos(np.clip(c0[2], -1.0, 1.0))
    ph = np.arctan2(c0[1], c0[0])

    def angles(ab):
        return np.array([np.sin(ab[0]) * np.cos(ab[1]),
                         np.sin(ab[0]) * np.sin(ab[1]),
                         np.cos(ab[0])])

    res = scipy.optimize.minimize(lambda ab: fn(angles(ab)), [th, ph],
                                  method="Nelder-Mead",
                                  options={"xatol": 1e-9, "fatol": 1e-13, "maxiter": 200})
    return angles(res.x), float(res.fun)


def select_seed_circles(pair: FieldPair, count: int, n: int = 128,
                        t_probe: float = 0.05, min_separation: float = 0.7) -> list:
    """Seed circles at the most promising centers for continuation.

    Scans a quasi-uniform center grid for small family obstruction, polishes
    one representative per basin, and ranks by the polished drift-only
    obstruction: solutions of the slightly deformed problem branch only from
    centers where that projection vanishes, and Gauss-Newton started at a
    nonzero local minimum stalls there.  Best centers first.
    """
    centers = _spread_centers(400)
    obs = _family_obstruction(pair, centers, t_probe)
    order = np.argsort(obs)
    basins: list = []
    for idx in order:
        c = centers[idx]
        if any(np.arccos(np.clip(c @ p, -1, 1)) < min_separation for p in basins):
            continue
        basins.append(c)
        if len(basins) >= max(3 * count, count + 4):
            break
    fn = _drift_obstruction_fn(pair, t_probe, min(n, 64))
    polished = [_polish_center(fn, c) for c in basins]
    polished.sort(key=lambda cv: cv[1])
    chosen: list = []
    for c, _ in polished:
        if any(np.arccos(np.clip(c @ p, -1, 1)) < 0.3 for p in chosen):
            continue
        chosen.append(c)
        if len(chosen) >= count:
            break
    rho = np.arctan2(1.0, pair.k_inf)
    return [_circle_at(c, rho, n) for c in chosen]


def seed_circles(pair: FieldPair, count: int, n: int = 128) -> list:
    """Latitude-type circles of geodesic radius arccot(k_inf), the known
    solution family of the round t=0 problem, centered quasi-uniformly."""
    rho = np.arctan2(1.0, pair.k_inf)
    t = np.arange(n) / n
    circles = []
    for c in _spread_centers(count):
        a = np.array([1.0, 0.0, 0.0]) if abs(c[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        u = a - (a @ c) * c
        u /= np.linalg.norm(u)
        w = np.cross(c, u)
        pts = (np.cos(rho) * c[np.newaxis, :]
               + np.sin(rho) * (np.outer(np.cos(2 * np.pi * t), u)
                                + np.outer(np.sin(2 * np.pi * t), w)))
        circles.append(DiscreteLoop(pts))
    return circles


# -- magnetic flow and shooting ---------------------------------------------


@dataclasses.dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    speed_drift: float  # relative drift of the g-speed over the run


def _flow_rhs(x, v, pair: FieldPair):
    """Batched right-hand side for states of shape (..., 3)."""
    gphi = pair.phi.gradient(x)
    k = pair.k.eval(x)[..., np.newaxis]
    vv = np.sum(v * v, axis=-1, keepdims=True)
    dphi_v = np.sum(gphi * v, axis=-1, keepdims=True)
    vdot = -vv * x + k * np.cross(x, v) - dphi_v * v + 0.5 * vv * gphi
    return v, vdot


def _flow_endpoint(x, v, T, pair: FieldPair, dt: float):
    """Endpoints of a batch of trajectories with per-member periods."""
    x = x.copy()
    v = v.copy()
    nsteps = max(1, int(np.ceil(np.max(T) / dt)))
    h = (np.asarray(T) / nsteps)[..., np.newaxis]
    for _ in range(nsteps):
        k1x, k1v = _flow_rhs(x, v, pair)
        k2x, k2v = _flow_rhs(x + 0.5 * h * k1x, v + 0.5 * h * k1v, pair)
        k3x, k3v = _flow_rhs(x + 0.5 * h * k2x, v + 0.5 * h * k2v, pair)
        k4x, k4v = _flow_rhs(x + h * k3x, v + h * k3v, pair)
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        x /= np.linalg.norm(x, axis=-1, keepdims=True)
        v -= np.sum(x * v, axis=-1, keepdims=True) * x
    return x, v


def integrate_flow(x0, v0, T: float, pair: FieldPair, dt: float = 1e-3) -> Trajectory:
    """Fixed-step RK4 for the magnetic-geodesic flow in ambient coordinates.

    Each step reprojects x to the sphere and v to the tangent plane; the
    g-speed is conserved by the flow (the force is g-orthogonal to v) and the
    observed relative drift is reported.
    """
    x = np.asarray(x0, dtype=float).copy()
    x /= np.linalg.norm(x)
    v = np.asarray(v0, dtype=float).copy()
    v -= (x @ v) * x
    if np.linalg.norm(v) < 1e-12:
        raise ValueError("initial velocity must be nonzero")
    nsteps = max(1, int(np.ceil(T / dt)))
    h = T / nsteps
    times = np.linspace(0.0, T, nsteps + 1)
    xs = np.empty((nsteps + 1, 3))
    vs = np.empty((nsteps + 1, 3))
    xs[0], vs[0] = x, v

    def gspeed(x, v):
        return float(np.sqrt(np.exp(pair.phi.eval(x[np.newaxis, :])[0]) * (v @ v)))

    s0 = gspeed(x, v)
    for i in range(nsteps):
        k1x, k1v = _flow_rhs(x, v, pair)
        k2x, k2v = _flow_rhs(x + 0.5 * h * k1x, v + 0.5 * h * k1v, pair)
        k3x, k3v = _flow_rhs(x + 0.5 * h * k2x, v + 0.5 * h * k2v, pair)
        k4x, k4v = _flow_rhs(x + h * k3x, v + h * k3v, pair)
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        x /= np.linalg.norm(x)
        v -= (x @ v) * x
        xs[i + 1], vs[i + 1] = x, v
    drift = abs(gspeed(x, v) - s0) / s0
    return Trajectory(times=times, points=xs, velocities=vs, speed_drift=drift)


def shoot_periodic(x0, v0, T_guess: float, pair: FieldPair,
                   opts: SolverOptions | None = None, dt: float = 2.5e-3) -> OrbitSolution:
    """Newton on the return map of the magnetic flow at unit g-speed.

    Unknowns: offset along the section, launch angle, period.  A converged
    trajectory is resampled to a uniform-parameter loop and polished by
    :func:`newton_solve` against the prescribed-curvature residual.
    """
    if T_guess <= 0:
        raise ValueError("period guess must be positive")
    opts = opts or SolverOptions()
    x0 = np.asarray(x0, dtype=float) / np.linalg.norm(x0)
    v0 = np.asarray(v0, dtype=float)
    v0 -= (x0 @ v0) * x0
    eph0 = float(np.exp(pair.phi.eval(x0[np.newaxis, :])[0]))
    v0 *= 1.0 / (np.sqrt(eph0) * np.linalg.norm(v0))  # unit g-speed
    perp = np.cross(x0, v0)
    pn = np.linalg.norm(perp)
    if pn < 1e-12:
        raise SectionError("cannot build a section transverse to the flow")
    perp /= pn

    def unpack(z):
        """(B, 3) unknowns -> launch states; rows are batch members."""
        delta, psi, T = z[..., 0:1], z[..., 1:2], z[..., 2]
        xs = x0 + delta * perp
        xs = xs / np.linalg.norm(xs, axis=-1, keepdims=True)
        e = v0 - np.sum(xs * v0, axis=-1, keepdims=True) * xs
        e /= np.linalg.norm(e, axis=-1, keepdims=True)
        f = np.cross(xs, e)
        ephs = np.exp(pair.phi.eval(xs))[..., np.newaxis]
        vs = (np.cos(psi) * e + np.sin(psi) * f) / np.sqrt(ephs)
        return xs, vs, T

    def mismatch(z):
        xs, vs, T = unpack(z)
        xe, ve = _flow_endpoint(xs, vs, T, pair, dt)
        return np.concatenate([xe - xs, ve - vs], axis=-1)

    z = np.array([0.0, 0.0, T_guess])
    hstep = 1e-7
    for _ in range(30):
        # value and forward-difference Jacobian from one batched integration
        zb = z[np.newaxis, :] + np.vstack([np.zeros(3), hstep * np.eye(3)])
        fb = mismatch(zb)
        f0 = fb[0]
        if np.linalg.norm(f0, np.inf) < 1e-10:
            break
        jac = (fb[1:] - f0).T / hstep
        step, *_ = np.linalg.lstsq(jac, -f0, rcond=None)
        z = z + step
        if z[2] <= 0:
            raise NonconvergenceError("shooting drove the period negative")
    else:
        raise NonconvergenceError("return-map Newton did not converge",
                                  residual_norm=float(np.linalg.norm(f0, np.inf)))

    xs, vs, T = unpack(z)
    sub = max(1, int(np.ceil(T / (opts.n * dt))))
    traj = integrate_flow(xs, vs, T, pair, dt=T / (opts.n * sub))
    pts = traj.points[: opts.n * sub : sub]
    loop = DiscreteLoop(pts)
    sol = newton_solve(loop, pair, opts)
    sol.period = float(T)
    return sol


# -- homotopy continuation ---------------------------------------------------


def continue_path(pair: FieldPair, seed: DiscreteLoop,
                  opts: SolverOptions | None = None,
                  t_start: float = 0.0) -> ContinuationPath:
    """Predictor-corrector in the deformation parameter t from t_start to 1.

    Secant predictor on loop points, Newton corrector at the deformed fields;
    steps halve on corrector failure and grow after easy successes.  A path
    that cannot advance reports 'blocked' rather than raising.
    """
    opts = opts or SolverOptions(n=seed.n)
    try:
        sol = newton_solve(seed, homotopy_fields(pair, t_start), opts)
    except NonconvergenceError:
        # can't even hold the starting point (e.g. unreachable tolerance)
        return ContinuationPath([], [(t_start, 0.0, None, False)], "blocked",
                                blocked_t=t_start)
    samples = [(t_start, sol)]
    history = []
    t = t_start
    dt = opts.dt_init
    prev_sol = None
    prev_dt = None
    # The first advance must slide along the weakly-broken circle family and
    # may need the full Newton budget; once on the branch a healthy corrector
    # converges in a handful of iterations, so later attempts fail fast and
    # halve dt instead of grinding through the whole budget.
    capped = dataclasses.replace(opts, max_iters=min(opts.max_iters, 12))
    while t < 1.0 - 1e-12:
        dt = min(dt, 1.0 - t)
        t_try = t + dt
        if prev_sol is not None:
            pred_pts = sol.loop.points + (dt / prev_dt) * (sol.loop.points - prev_sol.loop.points)
            pred_pts = pred_pts / np.linalg.norm(pred_pts, axis=1, keepdims=True)
            pred = DiscreteLoop(pred_pts)
        else:
            pred = sol.loop
        try:
            copts = opts if prev_sol is None else capped
            new_sol = newton_solve(pred, homotopy_fields(pair, t_try), copts)
        except (NonconvergenceError, CollapseError, LinearSolveError):
            history.append((t_try, dt, None, False))
            dt *= 0.5
            if dt < opts.dt_min:
                return ContinuationPath(samples, history, "blocked", blocked_t=t)
            continue
        history.append((t_try, dt, new_sol.newton_iters, True))
        prev_sol, prev_dt = sol, dt
        sol, t = new_sol, t_try
        if new_sol.newton_iters <= 3:
            dt = min(dt * 1.5, opts.dt_max)
        samples.append((t, sol))
    return ContinuationPath(samples, history, "reached")


# -- energy-level rescaling --------------------------------------------------


def rescale_to_energy(sol: OrbitSolution, c: float) -> OrbitSolution:
    """Reparameterize a prescribed-curvature solution to g-speed exactly c.

    If ``sol`` solves the prescribed equation for k/c, the same point set
    traversed with period |v|_g / c is a k-magnetic geodesic on the energy
    level E_c; the magnetic prescription stored on the result is c * k.
    """
    if c <= 0:
        raise ValueError("energy level must be positive")
    period = sol.speed / c
    mag_pair = FieldPair(phi=sol.pair.phi, k=sol.pair.k.scaled(c),
                         k_inf=c * sol.pair.k_inf, inf_gap=c * sol.pair.inf_gap)
    res = operators.residual_magnetic(sol.loop, mag_pair, period=period)
    return OrbitSolution(loop=sol.loop, pair=mag_pair,
                         residual_norm=res.sup_norm_g(mag_pair),
                         speed=c, newton_iters=sol.newton_iters,
                         kind="magnetic", energy=float(c), period=float(period),
                         report=sol.report)


# -- the two-orbit search ----------------------------------------------------


def find_two_orbits(pair: FieldPair, opts: SolverOptions | None = None,
                    seed_count: int = 8) -> list:
    """Continue from spread seed circles and return all distinct certified
    solutions at t=1; errors if fewer than two are found."""
    from . import verify  # deferred: verify depends on solver types

    opts = opts or SolverOptions()
    if pair.k_inf <= 0:
        raise SearchFailureError("curvature prescription must be certified positive")
    probe = _spread_centers(2000)
    kg = np.exp(-pair.phi.eval(probe)) * (1.0 - 0.5 * pair.phi.laplacian(probe))
    if np.min(kg) < 0:
        warnings.warn("Gauss curvature is negative somewhere on the test grid; "
                      "the two-orbit guarantee does not apply", stacklevel=2)

    # obstruction-ranked seeds converge far more reliably than a plain
    # spread of circle centers when the deformation is weak but generic
    seeds = select_seed_circles(pair, seed_count, n=opts.n)
    statuses = []
    endpoints = []
    for i, seed in enumerate(seeds):
        path = continue_path(pair, seed, opts)
        statuses.append((i, path.status, path.blocked_t))
        if path.status == "reached":
            endpoints.append(path.samples[-1][1])

    distinct = verify.distinct_orbits(endpoints)
    certified = []
    for sol in distinct:
        report = verify.verify_orbit(sol)
        sol.report = report
        if report.passed and report.alexandrov.at_least("NecessaryConditionsPass"):
            certified.append(sol)
    if len(certified) < 2:
        raise SearchFailureError(
            f"found {len(certified)} certified orbit(s), expected at least 2",
            diagnostics=statuses)
    return certified
