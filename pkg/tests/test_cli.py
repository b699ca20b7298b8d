import csv
import json
import os
import subprocess
import sys

import pytest

from roughedge import cli
from roughedge.config import load_config
from roughedge.errors import GridCoverageError

SMALL = "grid:\n  eps: [0.0625, 0.03125]\npatch:\n  box: 2.0\n  step: 0.5\nfigures: false\n"


def write(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_invalid_eps_list_is_rejected_before_compute(tmp_path, capsys):
    cfg = write(tmp_path, "grid:\n  eps: [0.01, 0.02]\n")
    out = tmp_path / "out"
    assert cli.main(["sweep", "--config", cfg, "--out", str(out)]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "grid.eps (line 2)" in err
    assert not out.exists()


def test_low_aperture_degree_cites_assumption(tmp_path, capsys):
    cfg = write(tmp_path, "kernel:\n  aperture_degree: 4\n")
    assert cli.main(["verify", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert "smoothness C^3" in capsys.readouterr().err


def test_thread_count_validation(tmp_path):
    assert cli.main(["gen", "--out", str(tmp_path / "o"), "--threads", "0"]) == cli.EXIT_CONFIG


def test_exit_code_mapping():
    assert cli._exit_code(GridCoverageError("x")) == cli.EXIT_COVERAGE
    assert len({cli.EXIT_CONFIG, cli.EXIT_ACCURACY, cli.EXIT_COVERAGE, cli.EXIT_GENERICITY}) == 4


def test_genericity_failure_exit(tmp_path):
    cfg = write(tmp_path, SMALL + "phantom:\n  center: [0.0, 0.0]\n  arc_halfwidth: 0.25\n")
    out = tmp_path / "o"
    assert cli.main(["sweep", "--config", cfg, "--out", str(out), "--quiet"]) == cli.EXIT_GENERICITY
    rec = json.loads((out / "failure.json").read_text())
    assert rec["error"] == "GenericityFailure" and rec["condition"] == "4"


def test_lock_busy(tmp_path):
    out = tmp_path / "o"
    out.mkdir()
    (out / ".roughedge.lock").write_text("123\n")
    assert cli.main(["gen", "--out", str(out), "--quiet"]) == cli.EXIT_LOCKED


def test_gen_zero_profile_manifest_and_corruption(tmp_path):
    cfg = write(tmp_path, SMALL + "profile:\n  kind: zero\n")
    out = tmp_path / "o"
    assert cli.main(["gen", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    man = json.loads((out / "cache" / "manifest.json").read_text())
    assert man["exact_zero"] and len(man["sinograms"]) == 2
    first = (out / "cache" / "sinogram_00.bin").read_bytes()
    assert cli.main(["gen", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    assert (out / "cache" / "sinogram_00.bin").read_bytes() == first
    raw = bytearray(first)
    raw[-1] ^= 0x40
    (out / "cache" / "sinogram_00.bin").write_bytes(bytes(raw))
    code = cli.main(["reconstruct", "--config", cfg, "--out", str(out), "--cache", str(out / "cache"), "--quiet"])
    assert code == cli.EXIT_CACHE
    assert "checksum" in json.loads((out / "failure.json").read_text())["message"]


def test_sweep_case_c_and_report(tmp_path):
    cfg = write(tmp_path, SMALL + "point:\n  case: C\ndiagnostics:\n  enabled: false\n")
    out = tmp_path / "o"
    assert cli.main(["sweep", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    summary = rows(out / "sweep_summary.csv")
    assert len(summary) == 2
    assert all(float(r["dtb_max"]) == 0.0 for r in summary)
    assert float(summary[1]["sup_norm"]) < float(summary[0]["sup_norm"])
    rem = rows(out / "remainder_01.csv")
    assert len(rem) == 81 and list(rem[0]) == ["eps", "xc1", "xc2", "x1", "x2", "f_rec", "dtb", "remainder"]
    rep = json.loads((out / "report.json").read_text())
    assert rep["case"] == "C_transverse" and all(c["passed"] for c in rep["certificates"].values())
    assert load_config(text=rep["config"]).data == load_config(cfg).data
    assert (out / "config.yaml").read_text() == rep["config"]
    assert set(rep["outputs"]) == {"sweep_summary.csv", "remainder_00.csv", "remainder_01.csv"}


def test_sweep_default_case_a_with_diagnostics(tmp_path):
    cfg = write(tmp_path, SMALL.replace("figures: false", "figures: true"))
    out = tmp_path / "o"
    assert cli.main(["sweep", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    summary = rows(out / "sweep_summary.csv")
    assert all(float(r["ratio"]) > 0 and float(r["S_I"]) > 0 and float(r["S_II"]) > 0 for r in summary)
    assert len(rows(out / "diagnostics.csv")) == 2
    for png in ("sweep.png", "remainder_last.png", "diagnostics.png"):
        assert (out / png).stat().st_size > 1000


def test_field_and_diag_commands(tmp_path):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "o"
    for cmd in ("reconstruct", "dtb", "diag"):
        assert cli.main([cmd, "--config", cfg, "--out", str(out), "--quiet"]) == 0
    rec = rows(out / "reconstruct.csv")
    dtb = rows(out / "dtb.csv")
    assert len(rec) == len(dtb) == 2 * 81
    am = rows(out / "am_table.csv")
    assert {r["m"] for r in am} == {str(m) for m in range(9)}


@pytest.mark.slow
def test_verify_console_script(tmp_path):
    cfg = write(tmp_path, "diagnostics:\n  model_eps: [0.0625, 0.015625]\n")
    out = tmp_path / "o"
    proc = subprocess.run([sys.executable, "-m", "roughedge.cli", "verify", "--config", cfg, "--out", str(out),
                           "--quiet"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    checks = {r["check"]: r for r in rows(out / "verify.csv")}
    for name in ("exactness_sum0", "exactness_sum1", "psi_periodicity", "dtb_radon_residual", "aperture_mass"):
        assert checks[name]["passed"] == "true"
    assert all(r["passed"] == "true" for r in checks.values() if r["check"].startswith("model_"))
    assert checks["fourier_decay_spread"]["gating"] == "false"
    assert os.path.exists(out / "model_integrals.csv")
