import json

import numpy as np
import pytest

from emscat import cli

NU2 = 1.584 ** 2


def _write_config(tmp_path, payload):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload))
    return str(path)


def _solve_config(tmp_path, outdir, **overrides):
    payload = {
        "task": "solve",
        "output_dir": str(outdir),
        "shape": {"kind": "sphere", "radius": 1.0},
        "medium": {"eps_minus_re": NU2},
        "size_lambda": 1.0,
        "n": 4,
        "theta_count": 24,
        "include_coefficients": True,
    }
    payload.update(overrides)
    return _write_config(tmp_path, payload)


def test_run_solve_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = _solve_config(tmp_path, out)
    assert cli.main(["run", cfg]) == 0
    rcs = (out / "rcs.csv").read_text().splitlines()
    assert rcs[0] == "theta_deg,sigma_HH_dB,sigma_VV_dB"
    assert len(rcs) == 25
    from emscat.driver import load_solution
    n, coeffs = load_solution(out / "solution.bin")
    assert n == 4
    assert coeffs.shape == (6 * 25,)


def test_solve_outputs_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cli.main(["run", _solve_config(tmp_path, out1)])
    cli.main(["run", _solve_config(tmp_path, out2)])
    assert (out1 / "rcs.csv").read_bytes() == (out2 / "rcs.csv").read_bytes()
    assert (out1 / "solution.bin").read_bytes() == (out2 / "solution.bin").read_bytes()


def test_zero_contrast_rcs_floor(tmp_path):
    out = tmp_path / "out"
    cfg = _solve_config(tmp_path, out, n=10, medium={"eps_minus_re": 1.0},
                        include_coefficients=False)
    assert cli.main(["run", cfg]) == 0
    rows = (out / "rcs.csv").read_text().splitlines()[1:]
    for row in rows:
        field = row.split(",")[1]
        assert field == "-inf" or float(field) < -150.0


def test_rcs_sentinel_formatting(tmp_path):
    from emscat.cli import _fmt
    assert _fmt(float("-inf")) == "-inf"
    assert _fmt(1.5) == "1.5"



def test_mie_check_subcommand(tmp_path):
    out = tmp_path / "out"
    cfg = _write_config(tmp_path, {
        "output_dir": str(out),
        "shape": {"kind": "sphere", "radius": 1.0},
        "medium": {"eps_minus_re": NU2},
        "size_lambda": 1.0,
        "n_values": [3, 5],
        "theta_count": 64,
    })
    assert cli.main(["mie-check", "--config", cfg]) == 0
    lines = (out / "errors.csv").read_text().splitlines()
    assert lines[0] == "n,err"
    assert len(lines) == 3


def test_cond_sweep_subcommand(tmp_path):
    out = tmp_path / "out"
    cfg = _write_config(tmp_path, {
        "output_dir": str(out),
        "shape": {"kind": "sphere", "radius": 1.0},
        "medium": {"eps_minus_re": 1.0},
        "n": 2,
        "omegas": [0.5, 1.5],
    })
    assert cli.main(["cond-sweep", "--config", cfg]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "omega,kappa_stab,kappa_unstab"
    assert len(lines) == 3


def test_counterexample_subcommand(tmp_path):
    out = tmp_path / "out"
    cfg = _write_config(tmp_path, {"output_dir": str(out), "xi_count": 10})
    assert cli.main(["counterexample", "--config", cfg]) == 0
    report = json.loads((out / "counterexample.json").read_text())
    assert report["max_abs_det_2x2"] < 1e-13


def test_near_field_subcommand(tmp_path):
    out = tmp_path / "out"
    cfg = _write_config(tmp_path, {
        "output_dir": str(out),
        "shape": {"kind": "sphere", "radius": 1.0},
        "medium": {"eps_minus_re": NU2},
        "size_lambda": 0.5,
        "n": 3,
        "points": [[0.0, 0.0, 3.0]],
    })
    assert cli.main(["near-field", "--config", cfg]) == 0
    lines = (out / "nearfield.csv").read_text().splitlines()
    assert len(lines) == 2


def test_malformed_config_exit_code(tmp_path):
    cfg = _write_config(tmp_path, {"task": "solve", "shape": {"kind": "cube"}})
    assert cli.main(["run", cfg]) == cli.EXIT_BAD_CONFIG


def test_unknown_task_exit_code(tmp_path):
    cfg = _write_config(tmp_path, {"task": "explode"})
    assert cli.main(["run", cfg]) == cli.EXIT_BAD_CONFIG


def test_infeasible_parameters_exit_code(tmp_path):
    out = tmp_path / "out"
    cfg = _solve_config(tmp_path, out, n_prime=5)
    assert cli.main(["run", cfg]) == cli.EXIT_INFEASIBLE
