import json
import subprocess
import sys
from pathlib import Path

import pytest

from leapfrog.cli import EXIT_CONFIG, EXIT_OK, EXIT_VERIFY, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_evolve(tmp_path, capsys):
    assert main(["evolve", "--config", str(CONFIGS / "fig3d_three_tuplet_open.json"), "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "fig3d_three_tuplet_open_density.csv").exists()
    assert (tmp_path / "fig3d_three_tuplet_open.json").exists()


def test_missing_config_is_config_error(tmp_path, capsys):
    assert main(["evolve", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["evolve", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_bad_config_names_field(tmp_path, capsys):
    cfg = json.loads((CONFIGS / "fig2a_two_tuplet.json").read_text())
    cfg["L"] = 31
    (tmp_path / "bad.json").write_text(json.dumps(cfg))
    assert main(["evolve", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "loadout" in capsys.readouterr().err


def test_wrong_config_kind(tmp_path, capsys):
    assert main(["robustness", "--config", str(CONFIGS / "fig2a_two_tuplet.json"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_scatter(tmp_path, capsys):
    assert main(["scatter", "--config", str(CONFIGS / "fig2d_collision.json"), "--out", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "fig2d_collision_scatter.json").read_text())
    assert summary["m_init"] == -4
    assert abs(summary["transmitted_final"] - 0.293) < 0.02


def test_boundstates(tmp_path, capsys):
    assert main(["boundstates", "--L", "15", "--N", "3", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "boundstates_L15_N3.json").read_text())
    assert len(rep["energies"]) == 2


def test_scars(tmp_path, capsys):
    assert main(["scars", "--L-max", "6", "--brute-force", "5", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "scar_counts.csv").read_text().splitlines()[-1] == "6,32,32,32,96"


def test_analytic(tmp_path, capsys):
    assert main(["analytic", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "analytic.json").read_text())
    assert abs(rep["transmission_total"] - 0.2928932188) < 1e-9


def test_verify_subset(tmp_path, capsys):
    assert main(["verify", "--criteria", "5,6", "--out", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "verification.json").read_text())
    assert report["passed"] and [c["number"] for c in report["criteria"]] == [5, 6]
    assert "tolerance" in report["criteria"][0]


def test_verify_failure_exit_code(tmp_path, monkeypatch, capsys):
    from leapfrog import verify
    from leapfrog.verify import CriterionResult

    monkeypatch.setitem(verify.CHECKS, 5, lambda: CriterionResult(5, "forced", False, {}, {}))
    assert main(["verify", "--criteria", "5", "--out", str(tmp_path)]) == EXIT_VERIFY


def test_threads_must_be_positive(tmp_path, capsys):
    assert main(["analytic", "--threads", "0", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "leapfrog", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("leapfrog v")
