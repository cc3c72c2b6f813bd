"""Tests for the command-line surface: output formats and exit codes."""

import json

import numpy as np
import pytest

from conestab import cli, model
from conestab.cli import (EXIT_CONFLICT, EXIT_INCONCLUSIVE, EXIT_INPUT,
                          EXIT_OK, EXIT_SOLVER, main)


class TestSolve:
    def test_builtin_converges(self, capsys):
        assert main(["solve", "--builtin", "example4"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "residual" in out
        assert "converged = True" in out

    def test_unique_multiplier_fixture(self, capsys):
        assert main(["solve", "--builtin", "example1"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "example1" in out

    def test_missing_file_is_input_error(self, capsys):
        assert main(["solve", "--problem", "missing.json"]) == EXIT_INPUT
        assert "not found" in capsys.readouterr().err

    def test_unknown_builtin_is_input_error(self):
        assert main(["solve", "--builtin", "nope"]) == EXIT_INPUT

    def test_json_output(self, tmp_path, capsys):
        out = tmp_path / "sol.json"
        assert main(["solve", "--builtin", "example4",
                     "--out", str(out)]) == EXIT_OK
        capsys.readouterr()
        data = json.loads(out.read_text())
        assert data["converged"] is True
        assert np.allclose(data["x"], [1.0, 0.0, 0.0], atol=1e-8)


class TestAnalyze:
    def test_robustly_isolated_calm_fixture(self, capsys):
        assert main(["analyze", "--builtin", "example4"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "ROBUST ISOLATED CALMNESS: HOLDS" in out
        assert "nondegeneracy: holds" in out
        assert "affine-hull probe: FAILS" in out

    def test_degenerate_fixture(self, capsys):
        assert main(["analyze", "--builtin", "example3"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "ROBUST ISOLATED CALMNESS: FAILS" in out
        assert "SRCQ FAILS" in out
        assert "SOSC holds" in out

    def test_nonunique_multiplier_fixture(self, capsys):
        assert main(["analyze", "--builtin", "example2"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "rcq: holds" in out
        assert "multiplier set: affine dim 2" in out

    def test_report_file_contains_all_verdicts(self, tmp_path, capsys):
        report = tmp_path / "report.json"
        assert main(["analyze", "--builtin", "example4",
                     "--report", str(report)]) == EXIT_OK
        capsys.readouterr()
        data = json.loads(report.read_text())
        for key in ("rcq", "srcq", "nondegeneracy", "sosc",
                    "affine_hull_probe", "kernel_probe", "theorem_verdict"):
            assert key in data
        assert data["theorem_verdict"] == "holds"
        assert data["srcq"]["margin"] is not None

    def test_report_is_deterministic(self, tmp_path, capsys):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        main(["analyze", "--builtin", "example3", "--report", str(a)])
        main(["analyze", "--builtin", "example3", "--report", str(b)])
        capsys.readouterr()
        assert a.read_text() == b.read_text()

    def test_nonaffine_fixture_rejected(self, capsys):
        assert main(["analyze", "--builtin", "remark2"]) == EXIT_INPUT


class TestSweep:
    def test_csv_to_stdout_with_exponent(self, capsys):
        code = main(["sweep", "--builtin", "example1", "--observable", "x2"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("eps,solved,dist_x,dist_y,residual,iterations")
        assert "fitted exponent 0.66" in out

    def test_csv_file_output(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        code = main(["sweep", "--builtin", "example4", "--out", str(out)])
        assert code == EXIT_OK
        capsys.readouterr()
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "eps,solved,dist_x,dist_y,residual,iterations"
        assert len(lines) == 12

    def test_custom_grid(self, capsys):
        code = main(["sweep", "--builtin", "example4", "--grid", "1:5:1"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert out.count("\n") >= 6  # header + 5 records + summary

    def test_bad_grid_is_input_error(self, capsys):
        assert main(["sweep", "--builtin", "example4",
                     "--grid", "oops"]) == EXIT_INPUT

    def test_too_few_points_is_solver_failure(self, capsys):
        code = main(["sweep", "--builtin", "example4", "--grid", "1:2:1"])
        assert code == EXIT_SOLVER


class TestCertify:
    def test_lipschitz_fixture_agrees(self, capsys):
        assert main(["certify", "--builtin", "example4"]) == EXIT_OK
        assert "agree" in capsys.readouterr().out

    def test_cube_root_fixture_agrees(self, capsys):
        assert main(["certify", "--builtin", "example1",
                     "--observable", "x2"]) == EXIT_OK
        assert "agree" in capsys.readouterr().out

    def test_square_root_fixture_agrees(self, capsys):
        assert main(["certify", "--builtin", "example3"]) == EXIT_OK
        assert "agree" in capsys.readouterr().out


class TestListBuiltins:
    def test_lists_all_fixtures(self, capsys):
        assert main(["list-builtins"]) == EXIT_OK
        out = capsys.readouterr().out.split()
        for name in ("example1", "example2", "example3", "example4"):
            assert name in out


class TestGridParsing:
    def test_decade_grid(self):
        grid = cli._parse_grid("1:3:1")
        assert np.allclose(grid, [1e-1, 1e-2, 1e-3])

    def test_half_decade_grid(self):
        grid = cli._parse_grid("1:2:0.5")
        assert len(grid) == 3

    def test_rejects_reversed_range(self):
        with pytest.raises(cli.InputError):
            cli._parse_grid("3:1:1")


class TestProblemFileFlow:
    def test_analyze_problem_file(self, tmp_path, capsys):
        path = tmp_path / "p.json"
        path.write_text(model.save_problem(model.builtin("example4")))
        assert main(["analyze", "--problem", str(path)]) == EXIT_OK
        assert "HOLDS" in capsys.readouterr().out

    def test_malformed_problem_file(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{}")
        assert main(["analyze", "--problem", str(path)]) == EXIT_INPUT
