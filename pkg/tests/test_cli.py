import json
import math
import subprocess
import sys

import numpy as np
import pytest

from bekk_ergo import __version__
from bekk_ergo.cli import main


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("BEKK_ERGO_SEED", raising=False)
    return tmp_path


def write_scalar(path, a2=0.2, e2=0.7):
    path.write_text(json.dumps({
        "format": "bekk-v1", "d": 1, "p": 1, "q": 1,
        "C": [[1.0]], "A": [[[math.sqrt(a2)]]], "B": [[[math.sqrt(e2)]]],
    }))
    return str(path)


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    doc = json.loads(out) if out.strip() else None
    return code, doc, err


class TestCheck:
    def test_scalar(self, workdir, capsys):
        code, doc, err = run_cli(capsys, "check", write_scalar(workdir / "s.json"))
        assert code == 0
        assert doc["report"]["rho_AB"] == pytest.approx(0.9)
        assert doc["version"] == __version__ and len(doc["model_hash"]) == 16
        assert doc["config"]["tol_margin"] == 0.0
        assert "rho" in err

    def test_non_stationary(self, workdir, capsys):
        code, doc, _ = run_cli(capsys, "check", write_scalar(workdir / "n.json", 0.6, 0.6))
        assert code == 2 and doc["report"]["stationary"] is False

    def test_malformed(self, workdir, capsys):
        (workdir / "bad.json").write_text('{"format": "bekk-v1",\n "d": }')
        code, doc, err = run_cli(capsys, "check", "bad.json")
        assert code == 1 and doc is None
        assert "line 2" in err

    def test_schema_field(self, workdir, capsys):
        (workdir / "bad.json").write_text(json.dumps({"format": "bekk-v1", "d": 1, "p": 1, "q": 1,
                                                       "C": [[-1.0]], "A": [[[0.1]]], "B": [[[0.1]]]}))
        code, _, err = run_cli(capsys, "check", "bad.json")
        assert code == 1 and "'C'" in err

    def test_missing_file(self, workdir, capsys):
        code, _, err = run_cli(capsys, "check", "nope.json")
        assert code == 1 and "not found" in err

    def test_quiet(self, workdir, capsys):
        code, _, err = run_cli(capsys, "--quiet", "check", write_scalar(workdir / "s.json"))
        assert code == 0 and err == ""


class TestSimulate:
    def test_deterministic_files(self, workdir, capsys):
        m = write_scalar(workdir / "m.json")
        run_cli(capsys, "simulate", m, "--n", "1000", "--seed", "7", "--out", "a")
        run_cli(capsys, "simulate", m, "--n", "1000", "--seed", "7", "--out", "b")
        assert (workdir / "a.csv").read_bytes() == (workdir / "b.csv").read_bytes()
        header = (workdir / "a.csv").read_text().splitlines()[0]
        assert header == "n,x_1,vech_sigma_1"
        side = json.loads((workdir / "a.json").read_text())
        assert side["seed"] == 7 and side["trajectory"]["n"] == 1000

    def test_env_seed(self, workdir, capsys, monkeypatch):
        m = write_scalar(workdir / "m.json")
        monkeypatch.setenv("BEKK_ERGO_SEED", "7")
        _, doc, _ = run_cli(capsys, "simulate", m, "--n", "50", "--out", "e")
        assert doc["seed"] == 7 and doc["seed_source"] == "env"

    def test_entropy_seed_recorded(self, workdir, capsys):
        m = write_scalar(workdir / "m.json")
        _, doc, _ = run_cli(capsys, "simulate", m, "--n", "20", "--out", "r1")
        _, doc2, _ = run_cli(capsys, "simulate", m, "--n", "20", "--seed", str(doc["seed"]), "--out", "r2")
        assert doc["seed_source"] == "entropy"
        a = np.loadtxt(workdir / "r1.csv", delimiter=",", skiprows=1)
        b = np.loadtxt(workdir / "r2.csv", delimiter=",", skiprows=1)
        np.testing.assert_array_equal(a, b)

    def test_student_scaling(self, workdir, capsys):
        m = write_scalar(workdir / "m.json")
        code, _, _ = run_cli(capsys, "simulate", m, "--n", "10", "--seed", "1", "--innov", "t:3", "--out", "t")
        side = json.loads((workdir / "t.json").read_text())
        assert code == 0
        assert side["trajectory"]["innovation"]["scaling"] == pytest.approx(math.sqrt(1 / 3))

    def test_binary(self, workdir, capsys):
        m = write_scalar(workdir / "m.json")
        run_cli(capsys, "simulate", m, "--n", "30", "--seed", "1", "--burn-in", "5", "--binary", "--out", "bin")
        data = np.load(workdir / "bin.npz")
        assert data["xs"].shape == (30, 1)
        assert data["n"][0] == 6

    def test_divergence_exit(self, workdir, capsys):
        m = write_scalar(workdir / "n.json", 0.6, 0.6)
        code, doc, err = run_cli(capsys, "simulate", m, "--n", "20000", "--seed", "1", "--out", "d")
        assert code == 3 and doc["trajectory"]["diverged"]
        assert (workdir / "d.csv").exists() and "diverged" in err

    def test_off_state_warning(self, workdir, capsys):
        run_cli(capsys, "example", "ex-3.3.11")
        code, doc, err = run_cli(capsys, "simulate", "ex-3.3.11.json", "--start", "ex-3.3.11.start-off.json",
                                 "--n", "50", "--seed", "1", "--out", "o")
        assert code == 0
        assert "start not on state-space variety" in err
        assert doc["off_state"]["flagged"]

    def test_bad_innovation(self, workdir, capsys):
        code, _, _ = run_cli(capsys, "simulate", write_scalar(workdir / "m.json"), "--innov", "cauchy")
        assert code == 1


class TestOtherCommands:
    def test_drift_scalar(self, workdir, capsys):
        code, doc, _ = run_cli(capsys, "drift", write_scalar(workdir / "s.json"), "--seed", "1",
                               "--path-states", "100", "--random-states", "20", "--boundary-states", "5")
        assert code == 0
        assert doc["certificate"]["alpha"] == pytest.approx(29 / 30, abs=1e-12)
        assert doc["certificate"]["b"] == pytest.approx(151 / 15, abs=1e-12)
        assert doc["rational"] == {"alpha0": "14/15", "alpha": "29/30", "b": "151/15"}
        assert doc["verification"]["ok"]

    def test_drift_non_stationary(self, workdir, capsys):
        code, _, _ = run_cli(capsys, "drift", write_scalar(workdir / "n.json", 0.6, 0.6), "--seed", "1")
        assert code == 2

    def test_convert_vech(self, workdir, capsys):
        run_cli(capsys, "example", "ex-2x2")
        code, doc, _ = run_cli(capsys, "convert", "ex-2x2.json", "--to", "vech")
        a, b, c, d = 0.3, 0.1, -0.2, 0.25
        expected = [[a * a, 2 * a * c, c * c], [a * b, a * d + b * c, c * d], [b * b, 2 * b * d, d * d]]
        assert code == 0
        np.testing.assert_allclose(doc["A"][0], expected, atol=1e-15)

    def test_convert_vec(self, workdir, capsys):
        run_cli(capsys, "example", "ex-2x2")
        _, doc, _ = run_cli(capsys, "convert", "ex-2x2.json", "--to", "vec")
        assert np.asarray(doc["A"][0]).shape == (4, 4)

    @pytest.mark.parametrize("name", ["scalar", "ex-2x2", "ex-3.3.10", "ex-3.3.11"])
    def test_examples(self, workdir, capsys, name):
        code, doc, _ = run_cli(capsys, "example", name, "--out-dir", "ex")
        assert code == 0
        assert (workdir / "ex" / f"{name}.json").exists()
        assert (workdir / "ex" / f"{name}.README.md").read_text().startswith(f"# {name}")
        code, _, _ = run_cli(capsys, "check", f"ex/{name}.json")
        assert code == 0

    def test_unknown_example(self, workdir, capsys):
        code, _, err = run_cli(capsys, "example", "ex-9")
        assert code == 1 and "unknown example" in err

    def test_diagnose_off_start(self, workdir, capsys):
        run_cli(capsys, "example", "ex-3.3.11")
        code, doc, err = run_cli(
            capsys, "diagnose", "ex-3.3.11.json", "--seed", "3",
            "--start", "ex-3.3.11.start-on.json", "--start", "ex-3.3.11.start-off.json",
            "--chains", "150", "--horizon", "20", "--reference-chains", "300",
            "--samples", "50", "--depth", "10", "--n", "20000", "--csv", "curve.csv",
        )
        assert code == 0
        assert doc["orbit"]["degenerate"]
        conv = doc["convergence"]
        s22 = conv["coordinate_labels"].index("sigma[0][1,1]")
        assert all(row[s22] == 1.0 for row in conv["per_coordinate"][1])
        assert doc["moments"]["ok"]
        assert (workdir / "curve.csv").read_text().startswith("lag,start,distance")
        assert "not on state-space variety" in err

    def test_usage_error_exit_code(self, workdir, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["check"])
        assert exc.value.code == 1


def test_console_script(tmp_path):
    out = subprocess.run([sys.executable, "-m", "bekk_ergo.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and __version__ in out.stdout
