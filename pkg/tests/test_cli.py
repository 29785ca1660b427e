import json
import subprocess
import sys

import pytest

from paisc.cli import EXIT_CONFIG, EXIT_NOT_APPLICABLE, EXIT_SEEDING, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestEstimate:
    def test_builtin_sphere_deterministic(self, capsys):
        args = ["estimate", "--subject", "sphere-d2", "--method", "dmc",
                "--budget", "10000", "--seed", "7", "--json"]
        code1, out1, _ = run_cli(capsys, *args)
        code2, out2, _ = run_cli(capsys, *args)
        assert code1 == code2 == 0
        d1, d2 = json.loads(out1), json.loads(out2)
        assert d1["mean"] == d2["mean"]
        assert d1["samples_used"] == 10000
        assert "rae" in d1

    def test_custom_constraint_with_config(self, capsys, tmp_path):
        cfg = tmp_path / "exp.ini"
        cfg.write_text(
            "[subject]\n"
            "constraint = (sqrt(x^2+y^2)-3)^2 + z^2 <= 1\n"
            "domain = x -5 5 ; y -5 5 ; z -5 5\n"
            "[distribution]\n"
            "x = studentt 2 0 0.5\n"
            "y = gaussian @x 0.5\n"
            "z = gaussian @x 0.5\n"
            "[estimate]\n"
            "method = dmc\n"
            "budget = 20000\n"
            "seed = 3\n"
        )
        code, out, _ = run_cli(capsys, "estimate", "--config", str(cfg), "--json")
        assert code == 0
        doc = json.loads(out)
        assert doc["method"] == "dmc"
        assert 0 <= doc["mean"] <= 1

    def test_flag_overrides_config(self, capsys, tmp_path):
        cfg = tmp_path / "exp.ini"
        cfg.write_text("[subject]\nbuiltin = sphere-d2\n[estimate]\nmethod = dmc\nbudget = 5000\n")
        code, out, _ = run_cli(capsys, "estimate", "--config", str(cfg),
                               "--budget", "2000", "--json")
        assert code == 0
        assert json.loads(out)["budget"] == 2000

    def test_stratified_on_correlated_exits_4(self, capsys):
        code, _, err = run_cli(capsys, "estimate", "--subject", "torus-correlated",
                               "--method", "stratified", "--budget", "1000")
        assert code == EXIT_NOT_APPLICABLE
        assert "not applicable" in err

    def test_malformed_constraint_exits_2(self, capsys, tmp_path):
        dom = tmp_path / "d.dom"
        dom.write_text("x 0 1\n")
        code, _, err = run_cli(capsys, "estimate", "--constraint", "x + <= 1",
                               "--domain", str(dom), "--method", "dmc")
        assert code == EXIT_CONFIG
        assert "position" in err

    def test_missing_subject_exits_2(self, capsys):
        code, _, err = run_cli(capsys, "estimate", "--method", "dmc")
        assert code == EXIT_CONFIG

    def test_infeasible_sympais_exits_3(self, capsys, tmp_path):
        dom = tmp_path / "d.dom"
        dom.write_text("x -5 5\n")
        cfg = tmp_path / "c.ini"
        cfg.write_text("[distribution]\nx = gaussian 0 1\n")
        code, _, err = run_cli(capsys, "estimate", "--config", str(cfg),
                               "--constraint", "x^2 <= -1", "--domain", str(dom),
                               "--method", "sympais", "--budget", "60000")
        assert code == EXIT_SEEDING
        assert "seeding failed" in err

    def test_help_documents_flags(self):
        out = subprocess.run(
            [sys.executable, "-m", "paisc.cli", "estimate", "--help"],
            capture_output=True, text=True,
        )
        assert out.returncode == 0
        for flag in ("--config", "--seed", "--budget", "--method", "--json", "--out"):
            assert flag in out.stdout


class TestPave:
    def test_circle_nonempty(self, capsys, tmp_path):
        out_file = tmp_path / "paving.json"
        code, _, _ = run_cli(capsys, "pave", "--subject", "circle-uniform",
                             "--accuracy", "0.25", "--out", str(out_file))
        assert code == 0
        doc = json.loads(out_file.read_text())
        assert doc["inner"] and doc["outer"]
        assert doc["vars"] == ["x", "y"]

    def test_infeasible_empty_exhausted(self, capsys, tmp_path):
        dom = tmp_path / "d.dom"
        dom.write_text("x -5 5\n")
        code, out, _ = run_cli(capsys, "pave", "--constraint", "x^2 <= -1",
                               "--domain", str(dom))
        assert code == 0
        doc = json.loads(out)
        assert doc["inner"] == [] and doc["outer"] == []
        assert doc["exhausted"] is True

    def test_halved_accuracy_inner_area_nondecreasing(self, capsys, tmp_path):
        def inner_area(accuracy):
            out_file = tmp_path / f"p{accuracy}.json"
            code, _, _ = run_cli(capsys, "pave", "--subject", "circle-uniform",
                                 "--accuracy", str(accuracy), "--out", str(out_file))
            assert code == 0
            doc = json.loads(out_file.read_text())
            area = 0.0
            for bounds in doc["inner"]:
                v = 1.0
                for lo, hi in bounds:
                    v *= hi - lo
                area += v
            return area

        assert inner_area(0.125) >= inner_area(0.25)


class TestBench:
    def test_unknown_subject_lists_builtins(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "bench", "--subjects", "nope",
                               "--out", str(tmp_path / "x.csv"))
        assert code == EXIT_CONFIG
        assert "sphere-d2" in err

    def test_grid_shape_and_rerun_identical(self, capsys, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["bench", "--subjects", "sphere-d2", "circle-uniform",
                "--methods", "dmc", "stratified", "--budgets", "2000", "5000",
                "--repetitions", "2", "--seed", "11"]
        code, _, _ = run_cli(capsys, *args, "--out", str(out1))
        assert code == 0
        lines = out1.read_text().splitlines()
        assert len(lines) == 1 + 2 * 2 * 2 * 2
        code, _, _ = run_cli(capsys, *args, "--out", str(out2))
        assert code == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_threads_byte_identical(self, capsys, tmp_path):
        out1, out2 = tmp_path / "t1.csv", tmp_path / "t4.csv"
        args = ["bench", "--subjects", "circle-uniform", "--methods", "dmc",
                "--budgets", "3000", "--repetitions", "4", "--seed", "2"]
        run_cli(capsys, *args, "--threads", "1", "--out", str(out1))
        run_cli(capsys, *args, "--threads", "4", "--out", str(out2))
        assert out1.read_bytes() == out2.read_bytes()

    def test_summary_printed(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "bench", "--subjects", "circle-uniform",
                               "--methods", "dmc", "--budgets", "2000",
                               "--repetitions", "1", "--seed", "0",
                               "--out", str(tmp_path / "s.csv"))
        assert code == 0
        assert "median RAE" in out
        assert "circle-uniform" in out


class TestMakeTruth:
    def test_regenerates_fixture(self, capsys, tmp_path, monkeypatch):
        code, out, _ = run_cli(capsys, "make-truth", "--targets", "torus-independent",
                               "--samples", "200000", "--seed", "1",
                               "--out", str(tmp_path))
        assert code == 0
        doc = json.loads((tmp_path / "torus-independent.json").read_text())
        assert doc["oracle_samples"] == 200000
        assert 0 <= doc["truth"] < 0.01

    def test_fixture_dir_env_override(self, capsys, tmp_path, monkeypatch):
        run_cli(capsys, "make-truth", "--targets", "torus-independent",
                "--samples", "100000", "--seed", "1", "--out", str(tmp_path))
        monkeypatch.setenv("PAISC_FIXTURES", str(tmp_path))
        from paisc.bench import load_fixture

        fx = load_fixture("torus-independent")
        assert fx["oracle_samples"] == 100000
