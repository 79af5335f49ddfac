import csv
import json

import numpy as np
import pytest

from gradfit.cli import FAILURE_MARKER, main


def read_table(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_hash=") and " seed=" in lines[0]
    return list(csv.DictReader(lines[1:]))


def test_probs_quarter_turn(tmp_path, capsys):
    assert main(["probs", "--basis", "a", "--n", "2", "--g", "0.7853981633974483", "--out", str(tmp_path)]) == 0
    rows = read_table(tmp_path / "probs_a_n2.csv")
    assert [r["xi"] for r in rows] == ["0", "1"]
    for r in rows:
        assert float(r["closed_form"]) == pytest.approx(0.5, abs=1e-15)
        assert float(r["abs_diff"]) < 1e-12


def test_probs_cascade_at_zero(tmp_path):
    assert main(["probs", "--basis", "b", "--n", "4", "--g", "0", "--out", str(tmp_path)]) == 0
    rows = read_table(tmp_path / "probs_b_n4.csv")
    assert [float(r["closed_form"]) for r in rows] == [1.0, 0.0, 0.0, 0.0]


def test_probs_columns_agree(tmp_path):
    assert main(["probs", "--basis", "b", "--n", "9", "--g", "0.37", "--gamma", "1.4", "--out", str(tmp_path)]) == 0
    rows = read_table(tmp_path / "probs_b_n9.csv")
    assert max(float(r["abs_diff"]) for r in rows) < 1e-12


def test_qfi_w_matrix(tmp_path):
    assert main(["qfi", "--n", "3", "--out", str(tmp_path)]) == 0
    rows = read_table(tmp_path / "qfi_w_n3.csv")
    m = np.array([[float(r["B2"]), float(r["B3"])] for r in rows])
    np.testing.assert_allclose(m, (16 / 9) * np.array([[2, -1], [-1, 2]]), rtol=1e-12)
    assert read_table(tmp_path / "qfi_w_n3_summary.csv")[0]["singular"] == "0"


def test_qfi_ghz(tmp_path, capsys):
    assert main(["qfi", "--state", "ghz", "--n", "3", "--out", str(tmp_path)]) == 0
    row = read_table(tmp_path / "qfi_ghz_n3.csv")[0]
    assert float(row["qfi_gradient"]) == pytest.approx(36, rel=1e-12)
    assert float(capsys.readouterr().out.strip()) == pytest.approx(36, rel=1e-12)


def test_qfi_noon_odd_is_config_error(tmp_path):
    assert main(["qfi", "--state", "noon", "--n", "3", "--out", str(tmp_path)]) == 2


def test_fisher_fourier_flagged_singular(tmp_path, capsys):
    assert main(["fisher", "--basis", "a", "--n", "5", "--out", str(tmp_path)]) == 0
    assert read_table(tmp_path / "fisher_a_n5_summary.csv")[0]["singular"] == "1"
    assert "singular: yes" in capsys.readouterr().out
    assert len(read_table(tmp_path / "fisher_a_n5_eigen.csv")) == 4


def test_simulate_outputs_and_reruns(tmp_path):
    args = ["simulate", "--n", "8", "--g", "0.05", "--shots", "100000", "--repeats", "200", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "one")]) == 0
    assert main(args + ["--out", str(tmp_path / "two")]) == 0
    for name in ("simulate_stats.csv", "simulate_trials.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
    stats = read_table(tmp_path / "one" / "simulate_stats.csv")[0]
    assert 0.9 <= float(stats["ratio_to_fi_crb"]) <= 1.2
    assert len(read_table(tmp_path / "one" / "simulate_trials.csv")) == 200


def test_sweep_analytic(tmp_path, capsys):
    assert main(["sweep", "--n", "8,16,32,64", "--analytic-only", "--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "sweep_manifest.json").read_text())
    assert -1.02 <= manifest["slope"] <= -0.98
    assert manifest["series"] == {"crb": "sweep_crb.dat", "table": "sweep.csv"}
    data = np.loadtxt(tmp_path / "sweep_crb.dat")
    assert data.shape == (4, 2) and list(data[:, 0]) == [8, 16, 32, 64]


def test_sweep_empirical_writes_std_series(tmp_path):
    assert main(["sweep", "--n", "3,4,5", "--shots", "2000", "--repeats", "10", "--out", str(tmp_path)]) == 0
    assert np.loadtxt(tmp_path / "sweep_std.dat").shape == (3, 2)


def test_env_var_sets_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("GRADFIT_OUT", str(tmp_path / "env"))
    assert main(["probs", "--n", "3"]) == 0
    assert (tmp_path / "env" / "probs_b_n3.csv").exists()


def test_config_file_and_flag_precedence(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[probe]\ngamma = 2.0\n[run]\nn = 4\nbasis = a\ng = 0.1\n")
    assert main(["probs", "--config", str(ini), "--n", "5", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "probs_a_n5.csv").exists()
    assert not (tmp_path / "probs_a_n4.csv").exists()


@pytest.mark.parametrize("text", ["[run]\nbogus = 1\n", "[extra]\nn = 3\n", "[run]\nn = three\n", "[run]\nshots = 0\n"])
def test_bad_config_exits_2(tmp_path, text):
    ini = tmp_path / "bad.ini"
    ini.write_text(text)
    assert main(["probs", "--config", str(ini), "--out", str(tmp_path)]) == 2


def test_missing_config_exits_2(tmp_path):
    assert main(["probs", "--config", str(tmp_path / "none.ini")]) == 2


def test_numerical_failure_leaves_marker(tmp_path, monkeypatch):
    import gradfit.cli as cli

    def boom(cfg, out):
        (out / "partial.csv").write_text("x\n")
        raise FloatingPointError("overflow")

    monkeypatch.setitem(cli.COMMANDS, "probs", boom)
    assert main(["probs", "--out", str(tmp_path)]) == 1
    assert (tmp_path / FAILURE_MARKER).exists() and (tmp_path / "partial.csv").exists()
    monkeypatch.undo()
    assert main(["probs", "--out", str(tmp_path)]) == 0
    assert not (tmp_path / FAILURE_MARKER).exists()


def test_verify_subset(capsys):
    assert main(["verify", "--criteria", "1,5"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("[PASS]") for line in lines)


def test_verify_reports_failing_criterion(capsys):
    assert main(["verify", "--criteria", "9"]) == 1
    assert "[FAIL] C9 basis a global negation" in capsys.readouterr().out


def test_verify_unknown_criterion():
    assert main(["verify", "--criteria", "11"]) == 2
