"""
Tests for main module - end-to-end runs of the command-line interface
"""

import json

import jsonschema
import numpy as np
import pandas as pd
import pytest

from steklov_limits.fem import disk_steklov_linear_eigenvalue
from steklov_limits.main import EXIT_CONFIG, EXIT_OK, run_cli
from steklov_limits.records import RecordValidationError, ResultRecord, load_schema

from . import DISK_NEUMANN_FIRST, TestDataManager


class TestSteklovCommand:
    """Test the steklov subcommand through run_cli."""

    def setup_method(self):
        self.temp_dir = TestDataManager.create_temp_dir()

    def teardown_method(self):
        TestDataManager.remove_temp_dir(self.temp_dir)

    def test_csv_output_files(self):
        out = self.temp_dir / "steklov.csv"
        code = run_cli(["steklov", "--refinement", "3", "--count", "5", "--out", str(out), "-q"])
        assert code == EXIT_OK

        table = pd.read_csv(out)
        assert list(table.columns) == ["j", "degree", "lambda_exact", "lambda_fem",
                                       "difference", "rate"]
        assert table["lambda_exact"].tolist() == pytest.approx([0, 1, 1, 2, 2])
        assert (self.temp_dir / "steklov.error.csv").exists()

        meta = json.loads((self.temp_dir / "steklov.meta.json").read_text())
        assert meta["experiment"] == "steklov"
        assert "elapsed_seconds" not in meta
        solvers = {c["name"]: c["solver"] for c in meta["columns"]}
        assert solvers["lambda_fem"] == "fem2d"
        assert solvers["lambda_exact"] == "ball-exact"

    def test_standard_output(self, capsys):
        code = run_cli(["steklov", "--dimension", "3", "--count", "5", "-q"])
        assert code == EXIT_OK
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == "j,degree,lambda_exact"
        assert [line.split(",")[2] for line in lines[1:]] == ["0", "1", "1", "1", "2"]

    def test_include_timing(self):
        out = self.temp_dir / "timed.json"
        code = run_cli(["steklov", "--dimension", "3", "--format", "json", "--include-timing",
                        "--out", str(out), "-q"])
        assert code == EXIT_OK
        document = json.loads(out.read_text())
        assert document["elapsed_seconds"] >= 0


    def test_linear_modes_flag(self, tmp_path):
        out = tmp_path / "steklov.json"
        code = run_cli(["steklov", "--refinement", "3", "--count", "5", "--format", "json",
                        "--out", str(out), "-q"])
        assert code == EXIT_OK
        document = json.loads(out.read_text())
        assert document["flags"]["linear_modes_exact"] is True
        assert document["inputs"]["lambda_linear_discrete"] == pytest.approx(
            disk_steklov_linear_eigenvalue(24))


class TestConvergenceCommand:
    """Test the FEM cross-check of the layer spectra."""

    @pytest.mark.slow
    def test_layer_cross_check_criterion(self, tmp_path):
        out = tmp_path / "conv.json"
        code = run_cli(["convergence", "--eps", "0.1", "0.05", "--indices", "0", "1", "2",
                        "--refinement", "3", "--format", "json", "--out", str(out), "-q"])
        assert code == EXIT_OK
        document = json.loads(out.read_text())
        rows = pd.DataFrame(document["rows"])
        assert (rows["fem_error_estimate"] >= 0).all()
        allowed = 3.0 * np.maximum(rows["fem_error_estimate"], 1e-10)
        expected = bool((rows["fem_difference"].abs() <= allowed).all())
        assert document["flags"]["fem_within_3_delta_h"] is expected
        positive = rows[rows["j"] > 0]
        assert (positive["fem_error_estimate"] > 0).all()


class TestNiwaCommand:
    """Test the annulus subcommand."""

    def test_json_document_validates(self, tmp_path):
        out = tmp_path / "niwa.json"
        code = run_cli(["niwa", "--eps", "0.5", "0.2", "0.1", "--format", "json",
                        "--out", str(out), "-q"])
        assert code == EXIT_OK

        document = json.loads(out.read_text())
        jsonschema.validate(instance=document, schema=load_schema())
        assert document["flags"] == {"increasing_in_epsilon": True, "below_disk_limit": True}
        assert [row["epsilon"] for row in document["rows"]] == [0.1, 0.2, 0.5]
        assert document["inputs"]["disk_limit"] == pytest.approx(DISK_NEUMANN_FIRST)

    def test_degenerate_width(self):
        assert run_cli(["niwa", "--eps", "1.0", "0.5", "-q"]) == EXIT_CONFIG


class TestCriticalityCommand:
    """Test the criticality subcommand on a coarse disk."""

    def test_constant_pair_flags(self, tmp_path):
        out = tmp_path / "crit.json"
        code = run_cli(["criticality", "--refinement", "3", "--cluster", "1", "2",
                        "--format", "json", "--out", str(out), "-q"])
        assert code == EXIT_OK

        document = json.loads(out.read_text())
        assert document["flags"]["constant_critical"] is True
        assert document["flags"]["neumann_not_critical"] is True
        problems = {(row["problem"], row["density"]) for row in document["rows"]}
        assert problems == {("steklov", "constant"), ("steklov", "perturbed"), ("neumann", "constant")}
        gradient = {row["problem"]: row["gradient_critical"] for row in document["rows"]
                    if row["density"] == "constant"}
        assert gradient == {"steklov": True, "neumann": False}
        levels = [r[0] for r in document["series"]["constant_deviation"]["rows"]]
        assert levels[-1] == 3 and levels == sorted(levels)

    def test_three_dimensions_rejected(self):
        assert run_cli(["criticality", "--dimension", "3", "-q"]) == EXIT_CONFIG


class TestBandleHerschCommand:
    """Test reproducibility of the sampled check."""

    @pytest.mark.integration
    def test_same_seed_same_bytes(self, tmp_path):
        outputs = []
        for name, jobs in (("first.csv", "1"), ("second.csv", "2")):
            out = tmp_path / name
            code = run_cli(["bandle-hersch", "--refinement", "3", "--trials", "3", "--seed", "11",
                            "--jobs", jobs, "--out", str(out), "-q"])
            assert code == EXIT_OK
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]

    def test_checked_rows_in_json(self, tmp_path):
        out = tmp_path / "bh.json"
        code = run_cli(["bandle-hersch", "--refinement", "3", "--trials", "2", "--seed", "4",
                        "--format", "json", "--out", str(out), "-q"])
        document = json.loads(out.read_text())
        assert code == EXIT_OK
        assert document["flags"]["constant_equality"] is True
        assert len(document["inputs"]["lambda_exact"]) == 4
        assert {row["j"] for row in document["rows"] if not row["checked"]} == {3}

    def test_missing_seed(self):
        assert run_cli(["bandle-hersch", "--refinement", "3", "-q"]) == EXIT_CONFIG


class TestExitCodes:
    """Test the mapping of failures to exit codes."""

    def test_usage_error(self):
        assert run_cli(["eigen"]) == 2

    def test_missing_mesh(self, tmp_path):
        code = run_cli(["steklov", "--mesh", str(tmp_path / "missing.mesh"), "-q"])
        assert code == EXIT_CONFIG

    def test_malformed_mesh(self, tmp_path):
        path = tmp_path / "bad.mesh"
        path.write_text("v 0 0\nv 1\n", encoding="utf-8")
        assert run_cli(["steklov", "--mesh", str(path), "-q"]) == EXIT_CONFIG

    def test_square_mesh_file(self, capsys):
        mesh = str(TestDataManager.get_fixture_path("square.mesh"))
        code = run_cli(["steklov", "--mesh", mesh, "--count", "4", "-q"])
        assert code == EXIT_OK
        assert capsys.readouterr().out.startswith("j,degree,lambda_exact,lambda_fem")


    def test_sampler_error(self):
        """Test that an order not dividing the boundary vertex count is a configuration error."""
        code = run_cli(["bandle-hersch", "--refinement", "3", "--symmetry", "5",
                        "--trials", "1", "--seed", "1", "-q"])
        assert code == EXIT_CONFIG


class TestGlobalOptions:
    """Test options given before the experiment name."""

    def test_before_subcommand(self, tmp_path):
        out = tmp_path / "ball.json"
        code = run_cli(["--format", "json", "--out", str(out), "steklov", "--dimension", "3", "-q"])
        assert code == EXIT_OK
        assert json.loads(out.read_text())["experiment"] == "steklov"

    def test_after_subcommand_wins(self, tmp_path):
        out = tmp_path / "niwa.out"
        code = run_cli(["--format", "csv", "niwa", "--eps", "0.5", "0.2", "--format", "json",
                        "--out", str(out), "-q"])
        assert code == EXIT_OK
        assert json.loads(out.read_text())["experiment"] == "niwa"

    def test_global_seed_and_jobs(self, tmp_path):
        out = tmp_path / "bh.csv"
        code = run_cli(["--seed", "11", "--jobs", "2", "bandle-hersch", "--refinement", "3",
                        "--trials", "1", "--out", str(out), "-q"])
        assert code == EXIT_OK
        assert "checked" in pd.read_csv(out).columns

    def test_global_config_file(self, tmp_path):
        config = tmp_path / "niwa.yaml"
        config.write_text("eps_grid: [0.4, 0.2]\nformat: json\n", encoding="utf-8")
        out = tmp_path / "niwa.json"
        assert run_cli(["--config", str(config), "niwa", "--out", str(out), "-q"]) == EXIT_OK
        assert [row["epsilon"] for row in json.loads(out.read_text())["rows"]] == [0.2, 0.4]


class TestResultRecord:
    """Test record metadata checks."""

    def _record(self) -> ResultRecord:
        table = pd.DataFrame({"epsilon": [0.1, 0.05], "value": [1.0, float("nan")]})
        return ResultRecord("niwa", {"eps_grid": [0.1, 0.05]}, table)

    def test_undescribed_column(self):
        record = self._record().describe("epsilon", "length", "input")
        with pytest.raises(RecordValidationError, match="undescribed column"):
            record.to_csv()

    def test_unknown_solver_tag(self):
        with pytest.raises(RecordValidationError, match="Unknown solver tag"):
            self._record().describe("value", "1", "magic")

    def test_nan_becomes_null(self):
        record = self._record().describe("epsilon", "length", "input").describe("value", "1", "derived")
        document = json.loads(record.to_json())
        assert document["rows"][1]["value"] is None

    def test_csv_format(self):
        record = self._record().describe("epsilon", "length", "input").describe("value", "1", "derived")
        assert record.to_csv() == "epsilon,value\n0.1,1\n0.05,\n"

    def test_passed(self):
        record = self._record()
        assert record.passed
        record.flags.update(a=True, b=False)
        assert not record.passed
