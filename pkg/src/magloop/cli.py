"""Command-line surface: config-driven solve/continue/verify/find-two/sweep/plot.

All runs are driven by a single YAML config; every artifact (orbit CSV/JSON,
verification report, continuation log, SVG plot) is listed with a sha256 in a
MANIFEST so a run is reproducible byte for byte from the config + seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import pathlib
import sys

import numpy as np
import yaml

from .errors import (
    CollapseError,
    ConfigError,
    MagloopError,
    NonconvergenceError,
    SearchFailureError,
)
from .fields import FieldPair, SphericalField, field_infimum, homotopy_fields
from .loops import (
    DiscreteLoop,
    loop_from_csv,
    loop_from_json,
    loop_to_csv,
    loop_to_json,
)
from .solver import (
    ContinuationPath,
    OrbitSolution,
    SolverOptions,
    continue_path,
    find_two_orbits,
    newton_solve,
    select_seed_circles,
)
from . import verify

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_BLOCKED = 4
EXIT_CERTIFICATION = 5

COMMANDS = ("solve", "continue", "verify", "find-two", "sweep", "plot")

_FIELD_KEYS = {"constant", "terms"}
_TOP_KEYS = {"phi", "k", "grid", "solver", "continuation", "output", "seed",
             "solve", "verify", "find_two", "sweep", "plot"}
_GRID_KEYS = {"n"}
_SOLVER_KEYS = {"newton_tol", "max_iters", "damping", "svd_truncation"}
_CONT_KEYS = {"t_start", "dt_init", "dt_min", "dt_max", "seed_count"}
_SOLVE_KEYS = {"seed_index"}
_VERIFY_KEYS = {"loop_file"}
_FIND_TWO_KEYS = set()
_SWEEP_KEYS = {"phi_scales"}
_PLOT_KEYS = {"loop_file"}


@dataclasses.dataclass
class RunConfig:
    pair: FieldPair
    n: int
    solver: SolverOptions
    t_start: float
    seed_count: int
    output_dir: pathlib.Path
    seed: int
    sections: dict  # per-command parameter blocks


def _check_keys(section: dict, allowed: set, where: str, violations: list):
    for key in section:
        if key not in allowed:
            violations.append(f"unknown key '{key}' in {where}")


def _parse_field(spec, where: str, violations: list) -> SphericalField:
    if spec is None:
        return SphericalField.zero()
    if not isinstance(spec, dict):
        violations.append(f"{where} must be a mapping")
        return SphericalField.zero()
    _check_keys(spec, _FIELD_KEYS, where, violations)
    terms = []
    if "constant" in spec:
        try:
            terms.append((0, 0, float(spec["constant"])))
        except (TypeError, ValueError):
            violations.append(f"{where}.constant must be a number")
    for i, t in enumerate(spec.get("terms") or []):
        try:
            l, m, c = int(t[0]), int(t[1]), float(t[2])
        except (TypeError, ValueError, IndexError):
            violations.append(f"{where}.terms[{i}] must be [l, m, coeff]")
            continue
        if l < 0 or abs(m) > l:
            violations.append(f"{where}.terms[{i}]: invalid harmonic index (l={l}, m={m})")
            continue
        terms.append((l, m, c))
    return SphericalField.from_terms(terms)


def parse_config(text: str) -> RunConfig:
    """Validate a YAML config; raises ConfigError listing every violation."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError([f"config syntax error{loc}: {getattr(exc, 'problem', exc)}"])
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(["config must be a mapping"])

    violations: list = []
    _check_keys(doc, _TOP_KEYS, "top level", violations)

    phi = _parse_field(doc.get("phi"), "phi", violations)
    k = _parse_field(doc.get("k"), "k", violations)

    grid = doc.get("grid") or {}
    _check_keys(grid, _GRID_KEYS, "grid", violations)
    n = grid.get("n", 128)
    if not isinstance(n, int) or n < 16 or n % 2 != 0:
        violations.append(f"grid.n must be an even integer >= 16, got {n!r}")
        n = 128

    sopts = doc.get("solver") or {}
    _check_keys(sopts, _SOLVER_KEYS, "solver", violations)
    cont = doc.get("continuation") or {}
    _check_keys(cont, _CONT_KEYS, "continuation", violations)
    try:
        solver = SolverOptions(
            newton_tol=float(sopts.get("newton_tol", 1e-10)),
            max_iters=int(sopts.get("max_iters", 50)),
            damping=float(sopts.get("damping", 0.5)),
            svd_truncation=float(sopts.get("svd_truncation", 1e-8)),
            n=n,
            dt_init=float(cont.get("dt_init", 0.05)),
            dt_min=float(cont.get("dt_min", 1e-4)),
            dt_max=float(cont.get("dt_max", 0.1)),
        )
    except (TypeError, ValueError) as exc:
        violations.append(f"solver options invalid: {exc}")
        solver = SolverOptions(n=n)
    t_start = float(cont.get("t_start", 0.0))
    if not 0.0 <= t_start < 1.0:
        violations.append(f"continuation.t_start must lie in [0, 1), got {t_start}")
        t_start = 0.0
    seed_count = int(cont.get("seed_count", 8))
    if seed_count < 1:
        violations.append("continuation.seed_count must be >= 1")
        seed_count = 8

    sections = {}
    for name, keys in (("solve", _SOLVE_KEYS), ("verify", _VERIFY_KEYS),
                       ("find_two", _FIND_TWO_KEYS), ("sweep", _SWEEP_KEYS),
                       ("plot", _PLOT_KEYS)):
        sec = doc.get(name) or {}
        if not isinstance(sec, dict):
            violations.append(f"{name} must be a mapping")
            sec = {}
        _check_keys(sec, keys, name, violations)
        sections[name] = sec

    bound = field_infimum(k, target_gap=1e-6)
    if bound.value <= 0.0:
        violations.append(
            f"k must be certified positive; lower bound {bound.value:.6g} <= 0")

    if violations:
        raise ConfigError(violations)

    pair = FieldPair(phi=phi, k=k, k_inf=bound.value, inf_gap=bound.gap)
    return RunConfig(pair=pair, n=n, solver=solver, t_start=t_start,
                     seed_count=seed_count,
                     output_dir=pathlib.Path(doc.get("output", "out")),
                     seed=int(doc.get("seed", 0)), sections=sections)


# -- artifact bookkeeping ----------------------------------------------------


class ArtifactWriter:
    """Writes run outputs and a MANIFEST of sha256 checksums."""

    def __init__(self, outdir: pathlib.Path):
        self.outdir = outdir
        outdir.mkdir(parents=True, exist_ok=True)
        self.entries: list = []

    def write_text(self, name: str, text: str):
        data = text.encode()
        (self.outdir / name).write_bytes(data)
        self.entries.append((name, hashlib.sha256(data).hexdigest()))

    def write_binary_done(self, name: str):
        # for files written by other libraries (plots); checksum post hoc
        data = (self.outdir / name).read_bytes()
        self.entries.append((name, hashlib.sha256(data).hexdigest()))

    def finalize(self, incomplete: str | None = None):
        lines = [f"{digest}  {name}" for name, digest in sorted(self.entries)]
        if incomplete:
            lines.append(f"# INCOMPLETE: {incomplete}")
        (self.outdir / "MANIFEST").write_text("\n".join(lines) + "\n")


def _write_orbit(writer: ArtifactWriter, tag: str, sol: OrbitSolution):
    writer.write_text(f"orbit_{tag}.csv", loop_to_csv(sol.loop))
    meta = {"residual_norm": sol.residual_norm, "speed": sol.speed,
            "kind": sol.kind, "period": sol.period, "newton_iters": sol.newton_iters}
    writer.write_text(f"orbit_{tag}.json", loop_to_json(sol.loop, meta))
    if sol.report is not None:
        writer.write_text(f"report_{tag}.json", verify.report_to_json(sol.report))


def _continuation_log(path: ContinuationPath) -> str:
    lines = ["t,dt,newton_iters,accepted"]
    for t, dt, iters, ok in path.step_history:
        lines.append("%.17g,%.17g,%s,%d" % (t, dt, "" if iters is None else iters, ok))
    return "\n".join(lines) + "\n"


def _read_loop_file(path: pathlib.Path) -> DiscreteLoop:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read loop file {path}: {exc}"])
    if path.suffix == ".json":
        return loop_from_json(text)
    return loop_from_csv(text)


# -- plotting ----------------------------------------------------------------


def _plot_orbit(writer: ArtifactWriter, loop: DiscreteLoop, tag: str):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from .geometry import stereographic_batch
    from .loops import eval_interp

    plt.rcParams["svg.hashsalt"] = "magloop"
    tdense = np.linspace(0.0, 1.0, 1024, endpoint=False)
    pts = eval_interp(loop.points, tdense)
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4.5))
    # orthographic view along +z; hidden half dashed
    circle = np.linspace(0, 2 * np.pi, 256)
    ax1.plot(np.cos(circle), np.sin(circle), color="0.7", lw=0.8)
    front = pts[:, 2] >= 0
    ax1.plot(np.where(front, pts[:, 0], np.nan), np.where(front, pts[:, 1], np.nan),
             "b-", lw=1.2)
    ax1.plot(np.where(~front, pts[:, 0], np.nan), np.where(~front, pts[:, 1], np.nan),
             "b--", lw=0.8)
    ax1.set_aspect("equal")
    ax1.set_title("orthographic (+z)")

    pole = verify.admissible_pole(loop)
    plane = stereographic_batch(pts, pole)
    idx, _ = verify.rotation_index_with_residual(loop, pole)
    ax2.plot(plane[:, 0], plane[:, 1], "b-", lw=1.2)
    ax2.set_aspect("equal")
    ax2.set_title(f"stereographic, rotation index {idx}")

    fig.tight_layout()
    name = f"orbit_{tag}.svg"
    fig.savefig(writer.outdir / name, format="svg", metadata={"Date": None})
    plt.close(fig)
    writer.write_binary_done(name)


# -- commands ----------------------------------------------------------------


def _cmd_solve(cfg: RunConfig, writer: ArtifactWriter) -> int:
    idx = int(cfg.sections["solve"].get("seed_index", 0))
    seeds = select_seed_circles(cfg.pair, max(idx + 1, cfg.seed_count), n=cfg.n)
    path = continue_path(cfg.pair, seeds[idx], cfg.solver, t_start=cfg.t_start)
    writer.write_text("continuation_000.csv", _continuation_log(path))
    if path.status != "reached":
        return EXIT_BLOCKED
    sol = path.samples[-1][1]
    sol.report = verify.verify_orbit(sol)
    _write_orbit(writer, "000", sol)
    return EXIT_OK if sol.report.passed else EXIT_CERTIFICATION


def _cmd_continue(cfg: RunConfig, writer: ArtifactWriter) -> int:
    return _cmd_solve(cfg, writer)


def _cmd_verify(cfg: RunConfig, writer: ArtifactWriter) -> int:
    loop_file = cfg.sections["verify"].get("loop_file")
    if not loop_file:
        raise ConfigError(["verify.loop_file is required for the verify command"])
    loop = _read_loop_file(pathlib.Path(loop_file))
    from . import operators
    res = operators.residual_prescribed(loop, cfg.pair)
    sol = OrbitSolution(loop=loop, pair=cfg.pair,
                        residual_norm=res.sup_norm_g(cfg.pair),
                        speed=float(np.mean(operators.speed_g_samples(loop, cfg.pair))),
                        newton_iters=0)
    report = verify.verify_orbit(sol)
    writer.write_text("report_000.json", verify.report_to_json(report))
    return EXIT_OK if report.passed else EXIT_CERTIFICATION


def _cmd_find_two(cfg: RunConfig, writer: ArtifactWriter) -> int:
    sols = find_two_orbits(cfg.pair, cfg.solver, seed_count=cfg.seed_count)
    ok = True
    for i, sol in enumerate(sols):
        _write_orbit(writer, "%03d" % i, sol)
        ok = ok and sol.report.passed
    return EXIT_OK if ok else EXIT_CERTIFICATION


def _cmd_sweep(cfg: RunConfig, writer: ArtifactWriter) -> int:
    scales = cfg.sections["sweep"].get("phi_scales") or [1.0]
    rows = ["phi_scale,length,residual_norm,rotation_index,passed"]
    all_ok = True
    for i, s in enumerate(scales):
        pair = FieldPair(phi=cfg.pair.phi.scaled(float(s)), k=cfg.pair.k,
                         k_inf=cfg.pair.k_inf, inf_gap=cfg.pair.inf_gap)
        path = continue_path(pair, select_seed_circles(pair, 1, n=cfg.n)[0], cfg.solver)
        if path.status != "reached":
            rows.append("%.17g,,,," % float(s))
            all_ok = False
            continue
        sol = path.samples[-1][1]
        sol.report = verify.verify_orbit(sol)
        _write_orbit(writer, "%03d" % i, sol)
        rows.append("%.17g,%.17g,%.17g,%d,%d" % (
            float(s), sol.report.length, sol.residual_norm,
            sol.report.rotation_idx, sol.report.passed))
        all_ok = all_ok and sol.report.passed
    writer.write_text("sweep.csv", "\n".join(rows) + "\n")
    if not all_ok:
        return EXIT_BLOCKED if any(r.endswith(",,,,") for r in rows) else EXIT_CERTIFICATION
    return EXIT_OK


def _cmd_plot(cfg: RunConfig, writer: ArtifactWriter) -> int:
    loop_file = cfg.sections["plot"].get("loop_file")
    if not loop_file:
        raise ConfigError(["plot.loop_file is required for the plot command"])
    loop = _read_loop_file(pathlib.Path(loop_file))
    _plot_orbit(writer, loop, "000")
    return EXIT_OK


_DISPATCH = {
    "solve": _cmd_solve,
    "continue": _cmd_continue,
    "verify": _cmd_verify,
    "find-two": _cmd_find_two,
    "sweep": _cmd_sweep,
    "plot": _cmd_plot,
}


def run_command(cmd: str, cfg: RunConfig) -> int:
    """Execute one command; artifacts land in cfg.output_dir with a MANIFEST."""
    writer = ArtifactWriter(cfg.output_dir)
    incomplete = None
    try:
        code = _DISPATCH[cmd](cfg, writer)
    except (NonconvergenceError, CollapseError) as exc:
        incomplete = f"solver nonconvergence: {exc}"
        code = EXIT_NONCONVERGENCE
    except SearchFailureError as exc:
        incomplete = f"search failed: {exc}"
        code = EXIT_CERTIFICATION
    finally:
        writer.finalize(incomplete)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="magloop",
        description="Closed curves of prescribed geodesic curvature on the "
                    "conformal 2-sphere: solve, continue, verify, plot.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("config", type=pathlib.Path, help="YAML run config")
    parser.add_argument("--output", type=pathlib.Path, default=None,
                        help="override the config's output directory")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config.read_text())
    except FileNotFoundError:
        print(f"config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    if args.output is not None:
        cfg.output_dir = args.output

    try:
        return run_command(args.command, cfg)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except MagloopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
