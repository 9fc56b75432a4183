"""Config parsing, artifact layout, exit codes and byte-level reproducibility."""

import hashlib
import pathlib

import numpy as np
import pytest

from magloop import cli
from magloop.errors import ConfigError
from magloop.loops import DiscreteLoop, loop_from_csv, loop_to_csv


GOOD_CONFIG = """
phi:
  terms: [[1, 0, 0.2]]
k:
  constant: 1.0
  terms: [[1, 1, 0.3]]
grid:
  n: 64
output: {out}
"""


def write_cfg(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_minimal_config():
    cfg = cli.parse_config("k:\n  constant: 2.0\n")
    assert cfg.pair.k_inf == pytest.approx(2.0)
    assert cfg.n == 128
    assert cfg.pair.phi.is_zero()


def test_parse_rejects_unknown_keys():
    with pytest.raises(ConfigError) as err:
        cli.parse_config("k:\n  constant: 1.0\nbogus: 1\ngrid:\n  m: 3\n")
    msgs = "\n".join(err.value.violations)
    assert "unknown key 'bogus'" in msgs
    assert "unknown key 'm'" in msgs


def test_parse_collects_all_violations():
    text = ("k:\n  constant: -1.0\n  terms: [[1, 5, 0.1]]\n"
            "grid:\n  n: 21\ncontinuation:\n  t_start: 1.5\n")
    with pytest.raises(ConfigError) as err:
        cli.parse_config(text)
    msgs = "\n".join(err.value.violations)
    assert "invalid harmonic index" in msgs
    assert "grid.n" in msgs
    assert "t_start" in msgs
    assert "certified positive" in msgs
    assert len(err.value.violations) >= 4


def test_parse_rejects_nonpositive_k():
    with pytest.raises(ConfigError) as err:
        cli.parse_config("k:\n  constant: 0.2\n  terms: [[1, 0, 1.0]]\n")
    assert any("certified positive" in v for v in err.value.violations)


def test_parse_syntax_error_located():
    with pytest.raises(ConfigError) as err:
        cli.parse_config("k: [unclosed\n  constant: 1.0\n")
    assert any("syntax error" in v for v in err.value.violations)


def test_main_config_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "k:\n  constant: -2.0\n")
    code = cli.main(["solve", str(cfg)])
    assert code == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_main_missing_config(tmp_path):
    assert cli.main(["solve", str(tmp_path / "nope.yaml")]) == cli.EXIT_CONFIG


def read_manifest(outdir):
    lines = (outdir / "MANIFEST").read_text().strip().split("\n")
    entries = {}
    incomplete = None
    for ln in lines:
        if ln.startswith("# INCOMPLETE:"):
            incomplete = ln
            continue
        digest, name = ln.split("  ")
        entries[name] = digest
    return entries, incomplete


def test_solve_round_problem(tmp_path):
    out = tmp_path / "out"
    cfg = write_cfg(tmp_path, f"k:\n  constant: 1.0\ngrid:\n  n: 64\noutput: {out}\n")
    code = cli.main(["solve", str(cfg)])
    assert code == cli.EXIT_OK
    entries, incomplete = read_manifest(out)
    assert incomplete is None
    assert {"orbit_000.csv", "orbit_000.json", "report_000.json",
            "continuation_000.csv"} <= set(entries)
    # manifest digests actually match the files
    for name, digest in entries.items():
        data = (out / name).read_bytes()
        assert hashlib.sha256(data).hexdigest() == digest
    # the orbit is a latitude-type circle of the right length
    loop = loop_from_csv((out / "orbit_000.csv").read_text())
    from magloop import operators
    from magloop.fields import FieldPair
    sp = operators.speed_g_samples(loop, FieldPair.round_constant(1.0))
    assert np.mean(sp) == pytest.approx(2 * np.pi / np.sqrt(2), rel=1e-8)


def test_solve_reruns_byte_identical(tmp_path):
    text = "k:\n  constant: 1.5\n  terms: [[1, 1, 0.2]]\ngrid:\n  n: 64\n"
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cfg = write_cfg(tmp_path, text)
    assert cli.main(["solve", str(cfg), "--output", str(out1)]) == cli.EXIT_OK
    assert cli.main(["solve", str(cfg), "--output", str(out2)]) == cli.EXIT_OK
    e1, _ = read_manifest(out1)
    e2, _ = read_manifest(out2)
    assert e1 == e2
    for name in e1:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_continue_blocked_exit(tmp_path):
    out = tmp_path / "out"
    text = (f"k:\n  constant: 1.0\ngrid:\n  n: 64\noutput: {out}\n"
            "solver:\n  newton_tol: 1.0e-18\n  max_iters: 3\n")
    cfg = write_cfg(tmp_path, text)
    assert cli.main(["continue", str(cfg)]) == cli.EXIT_BLOCKED
    entries, _ = read_manifest(out)
    assert "continuation_000.csv" in entries


def test_verify_command_on_solution(tmp_path):
    out1 = tmp_path / "solve_out"
    cfg1 = write_cfg(tmp_path, f"k:\n  constant: 1.0\ngrid:\n  n: 64\noutput: {out1}\n")
    assert cli.main(["solve", str(cfg1)]) == cli.EXIT_OK

    out2 = tmp_path / "verify_out"
    text = (f"k:\n  constant: 1.0\ngrid:\n  n: 64\noutput: {out2}\n"
            f"verify:\n  loop_file: {out1 / 'orbit_000.json'}\n")
    cfg2 = write_cfg(tmp_path, text, "verify.yaml")
    assert cli.main(["verify", str(cfg2)]) == cli.EXIT_OK
    assert (out2 / "report_000.json").exists()


def test_verify_command_flags_non_solution(tmp_path):
    # an equator loop does not satisfy k = 2
    n = 64
    t = 2 * np.pi * np.arange(n) / n
    eq = DiscreteLoop(np.stack([np.cos(t), np.sin(t), np.zeros(n)], axis=1))
    loop_file = tmp_path / "loop.csv"
    loop_file.write_text(loop_to_csv(eq))
    out = tmp_path / "out"
    text = (f"k:\n  constant: 2.0\ngrid:\n  n: 64\noutput: {out}\n"
            f"verify:\n  loop_file: {loop_file}\n")
    cfg = write_cfg(tmp_path, text)
    assert cli.main(["verify", str(cfg)]) == cli.EXIT_CERTIFICATION


def test_plot_deterministic_svg(tmp_path):
    out1 = tmp_path / "solve_out"
    cfg1 = write_cfg(tmp_path, f"k:\n  constant: 1.0\ngrid:\n  n: 64\noutput: {out1}\n")
    assert cli.main(["solve", str(cfg1)]) == cli.EXIT_OK

    svgs = []
    for sub in ("p1", "p2"):
        out = tmp_path / sub
        text = (f"k:\n  constant: 1.0\ngrid:\n  n: 64\noutput: {out}\n"
                f"plot:\n  loop_file: {out1 / 'orbit_000.json'}\n")
        cfg = write_cfg(tmp_path, text, f"{sub}.yaml")
        assert cli.main(["plot", str(cfg)]) == cli.EXIT_OK
        svgs.append((out / "orbit_000.svg").read_bytes())
        entries, _ = read_manifest(out)
        assert "orbit_000.svg" in entries
    assert svgs[0] == svgs[1]


def test_sweep_writes_table(tmp_path):
    out = tmp_path / "out"
    text = (f"phi:\n  terms: [[1, 0, 0.2]]\nk:\n  constant: 1.0\n"
            f"grid:\n  n: 64\noutput: {out}\n"
            "sweep:\n  phi_scales: [0.0, 1.0]\n")
    cfg = write_cfg(tmp_path, text)
    assert cli.main(["sweep", str(cfg)]) == cli.EXIT_OK
    table = (out / "sweep.csv").read_text().strip().split("\n")
    assert table[0] == "phi_scale,length,residual_norm,rotation_index,passed"
    assert len(table) == 3


def test_missing_loop_file_is_config_error(tmp_path, capsys):
    out = tmp_path / "out"
    text = (f"k:\n  constant: 1.0\ngrid:\n  n: 64\noutput: {out}\n"
            "verify:\n  loop_file: /nonexistent\n")
    cfg = write_cfg(tmp_path, text)
    assert cli.main(["verify", str(cfg)]) == cli.EXIT_CONFIG
    assert "cannot read loop file" in capsys.readouterr().err
