"""End-to-end tests for the ``remest`` command line."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from remest import __version__
from remest.cli import EXIT_GUARD, EXIT_OK, EXIT_VALIDATION, main
from remest.config import config_hash, load_config
from tests.conftest import _experiment_data, _write_config


def _read_json(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def _csv_rows(path: Path) -> list[list[str]]:
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.reader(line for line in f if not line.startswith("#")))


@pytest.fixture()
def out_dir(tmp_path: Path) -> Path:
    return tmp_path / "out"


# ---------------------------------------------------------------------------
# Exit codes
# ---------------------------------------------------------------------------


class TestExitCodes:
    """Error families map to distinct exit codes."""

    def test_state_guard(self, tmp_path: Path) -> None:
        data = _experiment_data()
        n = 5
        data["model"]["source"] = {
            "kind": "finite",
            "transition": np.eye(n).tolist(),
            "initial": [1.0 / n] * n,
        }
        data["model"]["distortion"] = {"kind": "matrix", "matrix": (1 - np.eye(n)).tolist()}
        data["output"] = {"directory": str(tmp_path / "out")}
        path = _write_config(tmp_path / "five.yaml", data)
        assert main(["solve-finite", str(path)]) == EXIT_GUARD

    def test_invalid_config(self, tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
        data = _experiment_data()
        data["model"]["channel"]["q"] = [[0.5, 0.6], [0.2, 0.8]]
        path = _write_config(tmp_path / "bad.yaml", data)
        assert main(["solve-finite", str(path)]) == EXIT_VALIDATION
        assert "q row 0" in capsys.readouterr().err

    def test_missing_config(self, tmp_path: Path) -> None:
        assert main(["check", str(tmp_path / "absent.yaml")]) == EXIT_VALIDATION

    def test_wrong_source_kind(self, calibration_config: Path) -> None:
        assert main(["solve-threshold", str(calibration_config)]) == EXIT_VALIDATION

    def test_finite_simulation_rejects_constant_threshold(
        self, calibration_config: Path
    ) -> None:
        code = main(["simulate", str(calibration_config), "--constant-threshold", "1.0"])
        assert code == EXIT_VALIDATION


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------


class TestSolveCommands:
    """solve-threshold and solve-finite outputs."""

    def test_solve_threshold_outputs(self, ar1_config: Path, out_dir: Path) -> None:
        assert main(["solve-threshold", str(ar1_config)]) == EXIT_OK
        for name in (
            "effective_config.yaml",
            "thresholds.json",
            "structure.json",
            "thresholds.csv",
            "value_grid.csv",
        ):
            assert (out_dir / name).exists(), name
        result = _read_json(out_dir / "thresholds.json")
        assert result["horizon"] == 3
        assert len(result["thresholds"]["k"]) == 4
        assert result["provenance"]["seed"] == 1234
        assert _read_json(out_dir / "structure.json")["passed"] is True
        rows = _csv_rows(out_dir / "thresholds.csv")
        assert rows[0] == ["t", "s", "k", "k_distortion"]
        assert len(rows) == 1 + 4 * 2
        assert len(_csv_rows(out_dir / "value_grid.csv")) == 1 + 4 * 2 * 1025

    def test_solve_finite_outputs(self, calibration_config: Path, out_dir: Path) -> None:
        assert main(["solve-finite", str(calibration_config)]) == EXIT_OK
        result = _read_json(out_dir / "finite_solution.json")
        assert result["horizon"] == 2
        assert result["node_count"] == len(result["nodes"])
        rows = _csv_rows(out_dir / "finite_policy.csv")
        assert rows[0] == ["t", "stage", "s", "belief", "value", "decision"]
        assert len(rows) == 1 + result["node_count"]

    def test_reruns_are_byte_identical(self, calibration_config: Path, out_dir: Path) -> None:
        assert main(["solve-finite", str(calibration_config)]) == EXIT_OK
        first = (out_dir / "finite_solution.json").read_bytes()
        assert main(["solve-finite", str(calibration_config)]) == EXIT_OK
        assert (out_dir / "finite_solution.json").read_bytes() == first

    def test_effective_config_carries_provenance(
        self, calibration_config: Path, out_dir: Path
    ) -> None:
        assert main(["solve-finite", str(calibration_config)]) == EXIT_OK
        path = out_dir / "effective_config.yaml"
        header = [line for line in path.read_text(encoding="utf-8").splitlines() if line[:1] == "#"]
        stamped = dict(line[2:].split("=", 1) for line in header)
        assert set(stamped) == {"config_hash", "seed", "toolkit_version"}
        assert stamped["seed"] == "20240"
        assert stamped["toolkit_version"] == __version__
        assert stamped["config_hash"] == config_hash(load_config(path))

    def test_overrides_reach_the_solver(self, calibration_config: Path, out_dir: Path) -> None:
        assert main(["solve-finite", str(calibration_config), "--set", "solver.horizon=1"]) == 0
        assert _read_json(out_dir / "finite_solution.json")["horizon"] == 1


# ---------------------------------------------------------------------------
# Simulation, oracle, sweep, check
# ---------------------------------------------------------------------------


class TestSimulateCommand:
    """Monte Carlo from policies and constant thresholds."""

    def test_never_transmit(self, ar1_config: Path, out_dir: Path) -> None:
        code = main(["simulate", str(ar1_config), "--constant-threshold", "inf"])
        assert code == EXIT_OK
        result = _read_json(out_dir / "cost_estimate.json")
        assert result["estimate"]["transmissions"] == 0.0
        assert "dp_value" not in result
        assert result["thresholds"]["k"][0] == ["inf", "inf"]
        trajectories = _csv_rows(out_dir / "trajectories.csv")
        assert len(trajectories) == 1 + 2 * 4

    def test_policy_file_from_solver(self, ar1_config: Path, out_dir: Path) -> None:
        assert main(["solve-threshold", str(ar1_config)]) == EXIT_OK
        policy = out_dir / "thresholds.json"
        assert main(["simulate", str(ar1_config), "--policy", str(policy)]) == EXIT_OK
        result = _read_json(out_dir / "cost_estimate.json")
        assert result["dp_value"] == _read_json(policy)["value"]
        assert isinstance(result["within_3se"], bool)

    def test_policy_horizon_mismatch(self, ar1_config: Path, out_dir: Path) -> None:
        assert main(["solve-threshold", str(ar1_config)]) == EXIT_OK
        policy = out_dir / "thresholds.json"
        code = main(
            ["simulate", str(ar1_config), "--policy", str(policy), "--set", "solver.horizon=2"]
        )
        assert code == EXIT_VALIDATION

    def test_same_seed_same_estimate(self, ar1_config: Path, out_dir: Path) -> None:
        args = ["simulate", str(ar1_config), "--constant-threshold", "1.0"]
        assert main(args) == EXIT_OK
        first = _read_json(out_dir / "cost_estimate.json")["estimate"]
        assert main([*args, "--set", "simulation.workers=3"]) == EXIT_OK
        assert _read_json(out_dir / "cost_estimate.json")["estimate"] == first


class TestOracleCommand:
    """Exhaustive search from the command line."""

    def test_oracle_matches_solver(self, calibration_config: Path, out_dir: Path) -> None:
        assert main(["solve-finite", str(calibration_config)]) == EXIT_OK
        dp_value = _read_json(out_dir / "finite_solution.json")["optimal_cost"]
        assert main(["oracle", str(calibration_config)]) == EXIT_OK
        result = _read_json(out_dir / "oracle_restricted.json")
        assert result["min_cost"] == pytest.approx(dp_value, abs=1e-9)
        assert result["size"]["granularity"] == "restricted"

    def test_oracle_guard(self, calibration_config: Path) -> None:
        code = main(["oracle", str(calibration_config), "--set", "solver.oracle_max_profiles=5"])
        assert code == EXIT_GUARD


class TestSweepCommand:
    """Lambda sweeps in long format."""

    def test_ar1_sweep(self, ar1_config: Path, out_dir: Path) -> None:
        args = ["sweep", str(ar1_config), "--values", "0,1.5", "--set", "simulation.n_reps=200"]
        assert main(args) == EXIT_OK
        rows = _csv_rows(out_dir / "sweep.csv")
        assert rows[0][:4] == ["lambda", "t", "s", "k"]
        assert len(rows) == 1 + 2 * 4 * 2
        assert all(row[3] == "0.0" for row in rows[1:9])
        values = [row["value"] for row in _read_json(out_dir / "sweep.json")["rows"]]
        assert values[0] <= values[1]

    def test_finite_sweep_from_config(self, calibration_config: Path, out_dir: Path) -> None:
        args = ["sweep", str(calibration_config), "--set", "solver.sweep_lambdas=[0.1, 0.4]"]
        assert main(args) == EXIT_OK
        assert len(_read_json(out_dir / "sweep.json")["rows"]) == 2

    def test_sweep_needs_values(self, calibration_config: Path) -> None:
        assert main(["sweep", str(calibration_config)]) == EXIT_VALIDATION

    def test_transmissions_fall_with_lambda(self, ar1_config: Path, out_dir: Path) -> None:
        always_on = "model.channel.q=[[0.0, 1.0], [0.0, 1.0]]"
        assert main(["sweep", str(ar1_config), "--values", "0,1,4,16", "--set", always_on]) == 0
        rows = _read_json(out_dir / "sweep.json")["rows"]
        transmissions = [row["estimate"]["transmissions"] for row in rows]
        assert transmissions[0] == 4.0
        for lighter, heavier in zip(transmissions, transmissions[1:]):
            assert heavier <= lighter + 0.05


class TestCheckCommand:
    """Property checks on the configured instance."""

    def test_finite_checks(self, calibration_config: Path, out_dir: Path) -> None:
        main(["check", str(calibration_config)])
        checks = _read_json(out_dir / "check_report.json")["checks"]
        assert checks["policy_recomputation"]["passed"]
        assert checks["dp_oracle_agreement"]["passed"]
        assert checks["dp_policy_exact_cost"]["passed"]
        assert "dp_simulation_consistency" in checks

    def test_ar1_checks(self, ar1_config: Path, out_dir: Path) -> None:
        main(["check", str(ar1_config), "--set", "simulation.n_reps=500"])
        checks = _read_json(out_dir / "check_report.json")["checks"]
        assert checks["structure"]["passed"]
        assert checks["lambda_zero_always_transmits"]["passed"]
        assert "perturbation" in checks
        convergence = checks["grid_convergence"]
        assert convergence["needs_refinement"] == (float(convergence["max_change_cells"]) >= 1.0)
        assert convergence["passed"] is not convergence["needs_refinement"]
