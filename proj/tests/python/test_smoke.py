"""End-to-end smoke tests for the qmri python module and the CLI binary.

The build directory paths come in through the environment:
  QMRI_PYMODULE_DIR - directory holding the compiled extension
  QMRI_CLI          - path to the qmri executable
"""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

sys.path.insert(0, os.environ.get("QMRI_PYMODULE_DIR", "build/python"))
import qmri  # noqa: E402

CLI = os.environ.get("QMRI_CLI", "build/tools/qmri")


def test_rotation_matrix_is_orthogonal():
    r = qmri.rotation_matrix(0.9, 1.3)
    assert np.abs(r @ r.T - np.eye(3)).max() < 1e-12
    assert abs(np.linalg.det(r) - 1.0) < 1e-12


def test_simulation_matches_the_frozen_single_pulse_value():
    sim = qmri.simulate_sequence(1000.0, 100.0, L=1, alpha=np.pi / 2, tr=40.0)
    np.testing.assert_allclose(
        sim["frames"][0], [0.0, -0.6703200460356393, 0.0392105608476768], atol=1e-12
    )


def test_derivatives_match_finite_differences():
    sim = qmri.simulate_sequence(900.0, 80.0, L=8, alpha=0.7, tr=40.0, with_derivs=True)
    h = 1e-3
    up = qmri.simulate_sequence(900.0 + h, 80.0, L=8, alpha=0.7, tr=40.0)
    dn = qmri.simulate_sequence(900.0 - h, 80.0, L=8, alpha=0.7, tr=40.0)
    fd = (up["frames"] - dn["frames"]) / (2 * h)
    assert np.linalg.norm(sim["d_t1"] - fd) / np.linalg.norm(fd) < 1e-6


def test_dft2_unitarity_and_inversion():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32))
    fx = qmri.dft2(x)
    assert abs(np.linalg.norm(fx) - np.linalg.norm(x)) < 1e-10
    assert np.abs(qmri.idft2(fx) - x).max() < 1e-12


def test_masks():
    assert qmri.cartesian_mask_rows(16, 4, 1) == [1, 5, 9, 13]
    radial = qmri.radial_mask(32, 16, 4, 1)
    assert radial[16, 16]  # line through the grid center


def test_full_pipeline_recovers_the_phantom():
    truth = qmri.make_phantom("default", 16)
    syn = qmri.synthesize_data(truth, L=3, alpha=40 * np.pi / 180, tr=40.0)
    assert syn["snr"] == np.inf

    x0 = qmri.ParameterMap.from_arrays(
        truth.t1 + 100.0 * truth.omega, truth.t2 + 10.0 * truth.omega, truth.rho
    )
    x, report = qmri.solve_gauss_newton(
        x0, syn["kspace"], "full", 1, 0, L=3, alpha=40 * np.pi / 180, tr=40.0, max_iters=6
    )
    err = qmri.error_rate(x, truth)
    assert err["t1"] < 1e-8 and err["t2"] < 1e-8 and err["rho"] < 1e-8
    assert report["termination"] in ("residual_floor", "max_iters", "stalled")


def test_dictionary_matching_recovers_scaled_atoms():
    d = qmri.build_dictionary(
        qmri.arange_grid(400, 2400, 400), qmri.arange_grid(40, 240, 40), L=5, alpha=0.7, tr=40.0
    )
    sim = qmri.simulate_sequence(1200.0, 120.0, L=5, alpha=0.7, tr=40.0)
    traj = [complex(f[0], f[1]) * 2.5 for f in sim["frames"]]
    match = d.match(traj)
    assert match["t1"] == 1200.0 and match["t2"] == 120.0
    assert abs(match["rho_mag"] - 2.5) < 1e-12


@pytest.fixture()
def workdir(tmp_path):
    cfg = {
        "phantom": {"builtin": "default", "N": 16},
        "sequence": {"L": 3, "alpha_deg": 40.0, "TR": 40.0},
        "sampling": {"mode": "full"},
        "noise": {"sigma": 0.0, "seed": 1},
        "output": str(tmp_path / "sim"),
    }
    (tmp_path / "sim.json").write_text(json.dumps(cfg))
    return tmp_path


def run_cli(*args):
    return subprocess.run([CLI, *args], capture_output=True, text=True)


def test_cli_simulate_is_deterministic(workdir):
    assert run_cli("simulate", str(workdir / "sim.json")).returncode == 0
    first = (workdir / "sim" / "kspace.bin").read_bytes()
    assert run_cli("simulate", str(workdir / "sim.json")).returncode == 0
    assert (workdir / "sim" / "kspace.bin").read_bytes() == first
    sidecar = json.loads((workdir / "sim" / "kspace.bin.json").read_text())
    assert sidecar["mask"]["mode"] == "full"
    assert sidecar["N"] == 16 and sidecar["L"] == 3


def test_cli_reconstruct_and_compare(workdir):
    assert run_cli("simulate", str(workdir / "sim.json")).returncode == 0
    rec = {
        "input": {"kspace": str(workdir / "sim" / "kspace.bin")},
        "sequence": {"L": 3, "alpha_deg": 40.0, "TR": 40.0},
        "method": {
            "name": "mrf",
            "dictionary": {
                "t1": {"start": 300, "stop": 4500, "step": 300},
                "t2": {"start": 30, "stop": 450, "step": 30},
            },
        },
        "output": str(workdir / "rec"),
    }
    (workdir / "rec.json").write_text(json.dumps(rec))
    out = run_cli("reconstruct", str(workdir / "rec.json"))
    assert out.returncode == 0

    # A second method for a multi-row table; rows keep command-line order.
    rec["method"]["name"] = "blip"
    rec["method"]["iterations"] = 5
    rec["output"] = str(workdir / "rec2")
    (workdir / "rec2.json").write_text(json.dumps(rec))
    assert run_cli("reconstruct", str(workdir / "rec2.json")).returncode == 0

    table = run_cli("compare", str(workdir / "sim" / "truth"), str(workdir / "rec"),
                    str(workdir / "rec2"))
    assert table.returncode == 0
    lines = table.stdout.splitlines()
    assert lines[0] == "label,time_s,err_T1,err_T2,err_rho"
    assert len(lines) == 3
    assert lines[1].startswith("rec,") and lines[2].startswith("rec2,")

    # Comparing a result against its own maps gives a zero-error row.
    self_row = run_cli("compare", str(workdir / "rec" / "maps"), str(workdir / "rec"))
    assert self_row.returncode == 0
    fields = self_row.stdout.splitlines()[1].split(",")
    assert float(fields[2]) == 0.0 and float(fields[3]) == 0.0 and float(fields[4]) == 0.0


def test_cli_blip_writes_residual_rows(workdir):
    assert run_cli("simulate", str(workdir / "sim.json")).returncode == 0
    rec = {
        "input": {"kspace": str(workdir / "sim" / "kspace.bin")},
        "sequence": {"L": 3, "alpha_deg": 40.0, "TR": 40.0},
        "method": {
            "name": "blip",
            "iterations": 7,
            "dictionary": {
                "t1": {"start": 300, "stop": 4500, "step": 300},
                "t2": {"start": 30, "stop": 450, "step": 30},
            },
        },
        "output": str(workdir / "blip"),
    }
    (workdir / "blip.json").write_text(json.dumps(rec))
    assert run_cli("reconstruct", str(workdir / "blip.json")).returncode == 0
    rows = (workdir / "blip" / "residuals.csv").read_text().strip().splitlines()
    assert rows[0] == "iteration,residual"
    assert len(rows) == 1 + 7


def test_cli_dict_build_and_reuse(workdir):
    assert run_cli("simulate", str(workdir / "sim.json")).returncode == 0
    dict_cfg = {
        "sequence": {"L": 3, "alpha_deg": 40.0, "TR": 40.0},
        "dictionary": {
            "t1": {"start": 300, "stop": 4500, "step": 300},
            "t2": {"start": 30, "stop": 450, "step": 30},
        },
        "output": str(workdir / "dict"),
    }
    (workdir / "dict.json").write_text(json.dumps(dict_cfg))
    out = run_cli("dict", str(workdir / "dict.json"))
    assert out.returncode == 0
    assert "atoms: 225" in out.stdout

    rec = {
        "input": {"kspace": str(workdir / "sim" / "kspace.bin")},
        "sequence": {"L": 3, "alpha_deg": 40.0, "TR": 40.0},
        "method": {"name": "mrf", "dictionary": {"path": str(workdir / "dict" / "dict.bin")}},
        "output": str(workdir / "rec_stored"),
    }
    (workdir / "rec_stored.json").write_text(json.dumps(rec))
    assert run_cli("reconstruct", str(workdir / "rec_stored.json")).returncode == 0


def test_cli_paper_scale_simulation(tmp_path):
    cfg = {
        "phantom": {"builtin": "default", "N": 128},
        "sequence": {"L": 80, "alpha_deg": 10.0, "TR": 10.0},
        "sampling": {"mode": "cartesian", "s": 8},
        "noise": {"sigma": 0.0, "seed": 1},
        "output": str(tmp_path / "big"),
    }
    (tmp_path / "big.json").write_text(json.dumps(cfg))
    assert run_cli("simulate", str(tmp_path / "big.json")).returncode == 0
    sidecar = json.loads((tmp_path / "big" / "kspace.bin.json").read_text())
    assert sidecar["mask"] == {"mode": "cartesian", "s": 8}
    assert sidecar["N"] == 128 and sidecar["L"] == 80


def test_cli_missing_field_exits_2(workdir):
    (workdir / "broken.json").write_text(json.dumps({"phantom": {"builtin": "default", "N": 8}}))
    out = run_cli("simulate", str(workdir / "broken.json"))
    assert out.returncode == 2
    assert "sequence" in out.stderr

    (workdir / "missing.json").write_text(
        json.dumps(
            {
                "phantom": {"spec": str(workdir / "nope.json")},
                "sequence": {"L": 3, "alpha_deg": 40.0, "TR": 40.0},
                "sampling": {"mode": "full"},
                "output": str(workdir / "x"),
            }
        )
    )
    out = run_cli("simulate", str(workdir / "missing.json"))
    assert out.returncode == 2
    assert "phantom.spec" in out.stderr


def test_cli_lm_mismatched_sequence_exits_2(workdir):
    assert run_cli("simulate", str(workdir / "sim.json")).returncode == 0
    rec = {
        "input": {"kspace": str(workdir / "sim" / "kspace.bin")},
        "sequence": {"L": 5, "alpha_deg": 40.0, "TR": 40.0},  # data has L=3
        "method": {"name": "lm"},
        "output": str(workdir / "bad"),
    }
    (workdir / "bad.json").write_text(json.dumps(rec))
    out = run_cli("reconstruct", str(workdir / "bad.json"))
    assert out.returncode == 2
