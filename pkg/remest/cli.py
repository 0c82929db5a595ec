"""Experiment runner: ``remest <command> CONFIG [options]``.

Commands:
    solve-threshold  threshold DP for an AR(1) source, thresholds and structure report
    solve-finite     reachable-belief DP for a finite source
    simulate         Monte Carlo cost of a policy file, a constant threshold, or the DP policy
    oracle           exhaustive search on a tiny finite instance
    sweep            DP value, thresholds and simulated cost over a list of lambdas
    check            property and acceptance checks on the configured instance

Exit codes: 0 success, 1 other error, 2 invalid config or model,
3 guard or budget exceeded, 4 structure violation or failed check.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from collections.abc import Callable
from pathlib import Path

import numpy as np

from remest.artifacts import ArtifactWriter, Provenance
from remest.config import ExperimentConfig, canonical_yaml, config_hash, load_config
from remest.errors import (
    ConfigError,
    GuardError,
    ModelValidationError,
    RemestError,
    StructureViolationError,
    TruncationOverflowError,
)
from remest.models.problem import AR1Problem, FiniteProblem
from remest.oracle import (
    Granularity,
    TinyInstance,
    exact_cost,
    exhaustive_search,
    profile_from_solution,
    search_size,
)
from remest.simulation import (
    monte_carlo_cost,
    perturbation_check,
    replication_rng,
    run_episode,
    simulate_finite,
)
from remest.solvers.finite import FiniteDPSolution, solve_finite
from remest.solvers.structure import check_structure
from remest.solvers.threshold import (
    SolverGrid,
    ThresholdSchedule,
    ValueGrid,
    backward_induction,
    convergence_check,
    extract_thresholds,
)

logger = logging.getLogger("remest")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2
EXIT_GUARD = 3
EXIT_STRUCTURE = 4

# Tolerance for DP/oracle agreement and policy re-evaluation.
_EXACT_TOL = 1e-9
_N_SE = 3.0


def exit_code_for(exc: RemestError) -> int:
    if isinstance(exc, ConfigError | ModelValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, GuardError | TruncationOverflowError):
        return EXIT_GUARD
    if isinstance(exc, StructureViolationError):
        return EXIT_STRUCTURE
    return EXIT_ERROR


# ------------------------------------------------------------------
# Shared helpers
# ------------------------------------------------------------------


def _writer(config: ExperimentConfig) -> ArtifactWriter:
    """Writer for the config's output directory, with the effective config echoed into it."""
    provenance = Provenance(config_hash(config), config.seed)
    writer = ArtifactWriter(config.output_dir(), provenance)
    writer.write_text("effective_config.yaml", provenance.comment_block() + canonical_yaml(config))
    return writer


def _ar1_problem(config: ExperimentConfig, command: str) -> AR1Problem:
    if config.is_finite:
        raise ConfigError(f"{command} needs an ar1 source, config has kind: finite")
    return config.problem()


def _finite_problem(config: ExperimentConfig, command: str) -> FiniteProblem:
    if not config.is_finite:
        raise ConfigError(f"{command} needs a finite source, config has kind: ar1")
    return config.problem()


def _solver_grid(config: ExperimentConfig, problem: AR1Problem) -> SolverGrid:
    solver = config.solver
    if solver.half_width is None:
        return SolverGrid.default_for(problem.source, solver.horizon, solver.n_points)
    return SolverGrid(solver.half_width, solver.n_points)


def _solve_threshold(
    config: ExperimentConfig, problem: AR1Problem
) -> tuple[ValueGrid, ThresholdSchedule]:
    vg = backward_induction(problem, config.solver.horizon, _solver_grid(config, problem))
    schedule = extract_thresholds(vg, refine=config.solver.refine, strict=False)
    return vg, schedule


def _solve_finite(config: ExperimentConfig, problem: FiniteProblem) -> FiniteDPSolution:
    solver = config.solver
    return solve_finite(
        problem,
        solver.horizon,
        max_states=solver.max_states,
        max_horizon=solver.max_horizon,
        max_nodes=solver.max_nodes,
    )


def _tiny_instance(config: ExperimentConfig, problem: FiniteProblem) -> TinyInstance:
    solver = config.solver
    return TinyInstance(
        problem=problem,
        horizon=solver.horizon,
        max_states=solver.oracle_max_states,
        max_horizon=solver.oracle_max_horizon,
        max_profiles=solver.oracle_max_profiles,
    )


def _threshold_rows(schedule: ThresholdSchedule, problem: AR1Problem):
    k_distortion = schedule.in_distortion_units(problem.distortion)
    for t in range(schedule.horizon + 1):
        for s in (0, 1):
            yield t, s, schedule.k[t, s], k_distortion[t, s]


def _load_policy(path: Path, horizon: int) -> tuple[ThresholdSchedule, float | None]:
    """Threshold schedule and, when present, the DP value stored alongside it."""
    if not path.exists():
        raise ConfigError(f"policy file not found: {path}")
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    try:
        schedule = ThresholdSchedule.from_dict(data.get("thresholds", data))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{path} is not a threshold policy: {e}") from e
    if schedule.horizon != horizon:
        raise ConfigError(
            f"policy file {path} covers T={schedule.horizon}, config has T={horizon}"
        )
    value = data.get("value")
    return schedule, None if value is None else float(value)


# ------------------------------------------------------------------
# Commands
# ------------------------------------------------------------------


def cmd_solve_threshold(config: ExperimentConfig) -> int:
    """Threshold DP, threshold table, value grid and structure report."""
    problem = _ar1_problem(config, "solve-threshold")
    writer = _writer(config)
    formats = config.output.formats
    vg, schedule = _solve_threshold(config, problem)
    report = check_structure(
        vg,
        problem.source.noise,
        problem.source.a,
        tolerance=config.solver.evenness_tol,
        monotonicity_tolerance=config.solver.monotonicity_tol,
    )
    value = vg.initial_value(problem.channel.initial)

    if "json" in formats:
        writer.write_json(
            "thresholds.json",
            {
                "horizon": config.solver.horizon,
                "lambda": problem.lam,
                "value": value,
                "grid": {"half_width": vg.grid.half_width, "n_points": vg.grid.n_points},
                "thresholds": schedule.to_dict(),
                "k_distortion": schedule.in_distortion_units(problem.distortion),
                "sign_changes": schedule.sign_changes,
            },
        )
        writer.write_json("structure.json", report.to_dict())
    if "csv" in formats:
        writer.write_csv(
            "thresholds.csv", ["t", "s", "k", "k_distortion"], _threshold_rows(schedule, problem)
        )
        writer.write_csv("value_grid.csv", ["t", "s", "e", "J", "J0", "J1"], vg.rows())
    if "hdf5" in formats:
        writer.write_value_grid_hdf5("value_grid.h5", vg)

    print(f"value J0(0) = {value:.12g}")
    print(f"structure check: {'passed' if report.passed else 'FAILED'}")
    return EXIT_OK if report.passed else EXIT_STRUCTURE


def _finite_rows(solution: FiniteDPSolution):
    for key, node in solution.graph.nodes.items():
        if key in solution.policy:
            decision = "".join(str(bit) for bit in solution.policy[key].decide)
        elif key in solution.estimates:
            decision = str(solution.estimates[key])
        else:
            decision = ""
        belief = ";".join(repr(float(p)) for p in node.pmf.probs)
        yield node.time, node.stage.value, node.channel_bit, belief, solution.value[key], decision


def cmd_solve_finite(config: ExperimentConfig) -> int:
    """Reachable-belief DP: solution JSON and a per-node summary table."""
    problem = _finite_problem(config, "solve-finite")
    writer = _writer(config)
    solution = _solve_finite(config, problem)
    if "json" in config.output.formats:
        writer.write_json("finite_solution.json", solution.to_dict())
    if "csv" in config.output.formats:
        writer.write_csv(
            "finite_policy.csv",
            ["t", "stage", "s", "belief", "value", "decision"],
            _finite_rows(solution),
        )
    print(f"value = {solution.optimal_cost:.12g} ({len(solution.graph)} nodes)")
    return EXIT_OK


def cmd_simulate(
    config: ExperimentConfig,
    policy: Path | None = None,
    constant_threshold: float | None = None,
) -> int:
    """Monte Carlo cost of a policy; without a policy the DP policy is solved first."""
    sim = config.simulation
    horizon = config.solver.horizon
    writer = _writer(config)
    payload: dict = {"horizon": horizon, "n_reps": sim.n_reps}

    if config.is_finite:
        if policy is not None or constant_threshold is not None:
            raise ConfigError("finite sources are simulated with their DP policy only")
        problem = _finite_problem(config, "simulate")
        solution = _solve_finite(config, problem)
        estimate = simulate_finite(problem, solution, horizon, sim.n_reps, sim.seed)
        dp_value: float | None = solution.optimal_cost
    else:
        problem = _ar1_problem(config, "simulate")
        if policy is not None:
            schedule, dp_value = _load_policy(policy, horizon)
        elif constant_threshold is not None:
            schedule, dp_value = ThresholdSchedule.constant(horizon, constant_threshold), None
        else:
            vg, schedule = _solve_threshold(config, problem)
            dp_value = vg.initial_value(problem.channel.initial)
        payload["thresholds"] = schedule.to_dict()
        estimate = monte_carlo_cost(
            problem, schedule, horizon, sim.n_reps, sim.seed, workers=sim.workers
        )
        if sim.trajectories and "csv" in config.output.formats:
            writer.write_csv(
                "trajectories.csv",
                ["rep", "t", "x", "s", "u", "y_tag", "y_value", "xhat", "cost"],
                (
                    (r, *row)
                    for r in range(sim.trajectories)
                    for row in run_episode(
                        problem, schedule, horizon, replication_rng(sim.seed, r)
                    ).rows()
                ),
            )

    payload["estimate"] = estimate.to_dict()
    print(f"mean = {estimate.mean:.6f} +- {estimate.std_error:.6f} (n={estimate.n_reps})")
    if dp_value is not None:
        within = estimate.within(dp_value, _N_SE)
        payload["dp_value"] = dp_value
        payload["within_3se"] = within
        print(f"DP value = {dp_value:.6f}; within 3 SE: {str(within).lower()}")
    if "json" in config.output.formats:
        writer.write_json("cost_estimate.json", payload)
    return EXIT_OK


def cmd_oracle(config: ExperimentConfig, granularity: Granularity = Granularity.RESTRICTED) -> int:
    """Exhaustive search: minimum cost, argmin profile and enumeration sizes."""
    problem = _finite_problem(config, "oracle")
    instance = _tiny_instance(config, problem)
    size = search_size(instance, granularity)
    print(
        f"{granularity.value}: {size.transmitter_sets} transmitter sets, "
        f"{size.receiver_sets} receiver sets, {size.enumerated} candidates"
    )
    writer = _writer(config)
    result = exhaustive_search(instance, granularity)
    writer.write_json(f"oracle_{granularity.value}.json", result.to_dict())
    print(f"minimum = {result.min_cost:.12g}")
    return EXIT_OK


def cmd_sweep(config: ExperimentConfig, values: list[float] | None = None) -> int:
    """One DP solve and one simulation per lambda, written in long format."""
    lambdas = list(values) if values else list(config.solver.sweep_lambdas)
    if not lambdas:
        raise ConfigError("sweep needs lambda values (--values or solver.sweep_lambdas)")
    if any(not math.isfinite(v) or v < 0 for v in lambdas) or lambdas != sorted(lambdas):
        raise ConfigError(f"sweep values must be finite, nonnegative and sorted: {lambdas}")

    sim = config.simulation
    horizon = config.solver.horizon
    writer = _writer(config)
    base = config.problem()
    rows: list[tuple] = []
    summary: list[dict] = []
    for lam in lambdas:
        problem = base.with_lambda(lam)
        if isinstance(problem, FiniteProblem):
            solution = _solve_finite(config, problem)
            value = solution.optimal_cost
            estimate = simulate_finite(problem, solution, horizon, sim.n_reps, sim.seed)
            rows.append(
                (lam, "", "", "", value, estimate.mean, estimate.std_error, estimate.transmissions)
            )
            thresholds = None
        else:
            vg, schedule = _solve_threshold(config, problem)
            value = vg.initial_value(problem.channel.initial)
            estimate = monte_carlo_cost(
                problem, schedule, horizon, sim.n_reps, sim.seed, workers=sim.workers
            )
            for t in range(horizon + 1):
                for s in (0, 1):
                    rows.append(
                        (
                            lam, t, s, schedule.k[t, s], value,
                            estimate.mean, estimate.std_error, estimate.transmissions,
                        )
                    )
            thresholds = schedule.to_dict()
        summary.append(
            {
                "lambda": lam,
                "value": value,
                "estimate": estimate.to_dict(),
                "thresholds": thresholds,
            }
        )
        logger.info("lambda=%g: value=%.6f, transmissions=%.4f", lam, value, estimate.transmissions)

    if "csv" in config.output.formats:
        writer.write_csv(
            "sweep.csv",
            ["lambda", "t", "s", "k", "value", "sim_mean", "sim_std_error", "transmissions"],
            rows,
        )
    if "json" in config.output.formats:
        writer.write_json("sweep.json", {"horizon": horizon, "rows": summary})
    return EXIT_OK


def _check_ar1(config: ExperimentConfig, problem: AR1Problem) -> dict[str, dict]:
    sim = config.simulation
    horizon = config.solver.horizon
    checks: dict[str, dict] = {}

    vg, schedule = _solve_threshold(config, problem)
    report = check_structure(
        vg,
        problem.source.noise,
        problem.source.a,
        tolerance=config.solver.evenness_tol,
        monotonicity_tolerance=config.solver.monotonicity_tol,
    )
    checks["structure"] = report.to_dict()
    checks["grid_convergence"] = convergence_check(problem, horizon, vg.grid).to_dict()

    zero = extract_thresholds(
        backward_induction(problem.with_lambda(0.0), horizon, vg.grid), strict=False
    )
    checks["lambda_zero_always_transmits"] = {"passed": bool(np.all(zero.k == 0.0))}

    q = problem.channel.matrix
    if np.array_equal(q[0], q[1]):
        checks["equal_rows_state_independent"] = {
            "passed": bool(np.array_equal(schedule.k[:, 0], schedule.k[:, 1]))
        }

    value = vg.initial_value(problem.channel.initial)
    estimate = monte_carlo_cost(
        problem, schedule, horizon, sim.n_reps, sim.seed, workers=sim.workers
    )
    checks["dp_simulation_consistency"] = {
        "passed": estimate.within(value, _N_SE),
        "dp_value": value,
        "estimate": estimate.to_dict(),
    }

    perturbation = perturbation_check(
        problem,
        schedule,
        sim.perturbation_deltas,
        horizon,
        sim.n_reps,
        sim.seed,
        workers=sim.workers,
    )
    checks["perturbation"] = perturbation.to_dict()
    return checks


def _check_finite(config: ExperimentConfig, problem: FiniteProblem) -> dict[str, dict]:
    sim = config.simulation
    horizon = config.solver.horizon
    checks: dict[str, dict] = {}

    solution = _solve_finite(config, problem)
    value = solution.optimal_cost
    gap = solution.recomputation_gap()
    checks["policy_recomputation"] = {"passed": gap <= _EXACT_TOL, "gap": gap}

    solver = config.solver
    within_guards = (
        problem.source.n_states <= solver.oracle_max_states
        and horizon <= solver.oracle_max_horizon
    )
    if within_guards:
        instance = _tiny_instance(config, problem)
        result = exhaustive_search(instance, Granularity.RESTRICTED)
        checks["dp_oracle_agreement"] = {
            "passed": abs(result.min_cost - value) <= _EXACT_TOL,
            "dp_value": value,
            "oracle_min": result.min_cost,
        }
        replayed = exact_cost(instance, profile_from_solution(instance, solution))
        checks["dp_policy_exact_cost"] = {
            "passed": abs(replayed - value) <= _EXACT_TOL,
            "exact_cost": replayed,
        }
    else:
        logger.info("Instance exceeds the oracle guards; skipping oracle checks")

    estimate = simulate_finite(problem, solution, horizon, sim.n_reps, sim.seed)
    checks["dp_simulation_consistency"] = {
        "passed": estimate.within(value, _N_SE),
        "dp_value": value,
        "estimate": estimate.to_dict(),
    }
    return checks


def cmd_check(config: ExperimentConfig) -> int:
    """Run the property checks for the configured source and write ``check_report.json``."""
    problem = config.problem()
    writer = _writer(config)
    if isinstance(problem, FiniteProblem):
        checks = _check_finite(config, problem)
    else:
        checks = _check_ar1(config, problem)
    passed = all(check["passed"] for check in checks.values())
    writer.write_json("check_report.json", {"passed": passed, "checks": checks})
    for name, check in checks.items():
        print(f"{name}: {'ok' if check['passed'] else 'FAILED'}")
    return EXIT_OK if passed else EXIT_STRUCTURE


# ------------------------------------------------------------------
# Entry point
# ------------------------------------------------------------------


def _parse_values(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="remest",
        description="Remote estimation over a Gilbert-Elliott channel: solvers, simulator, oracle.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level.")
    commands = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("config", type=Path, help="Experiment YAML file.")
        sub.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="Override a config field (value parsed as YAML). Repeatable.",
        )
        sub.add_argument("--seed", type=int, default=None, help="Override simulation.seed.")
        sub.add_argument(
            "--output-dir", type=Path, default=None, help="Override output.directory."
        )
        return sub

    command("solve-threshold", "Solve the threshold DP for an AR(1) source.")
    command("solve-finite", "Solve the reachable-belief DP for a finite source.")
    simulate = command("simulate", "Estimate the expected cost of a policy by Monte Carlo.")
    simulate.add_argument("--policy", type=Path, default=None, help="thresholds.json to simulate.")
    simulate.add_argument(
        "--constant-threshold",
        type=float,
        default=None,
        help="Simulate the same threshold everywhere (inf never transmits, 0 always does).",
    )
    oracle = command("oracle", "Exhaustive strategy search on a tiny finite instance.")
    oracle.add_argument(
        "--granularity",
        choices=[g.value for g in Granularity],
        default=Granularity.RESTRICTED.value,
    )
    sweep = command("sweep", "Solve and simulate over a list of lambda values.")
    sweep.add_argument("--values", type=_parse_values, default=None, help="e.g. 0,0.5,1,2")
    command("check", "Run the property and acceptance checks on the configured instance.")
    return parser


def _dispatch(args: argparse.Namespace, config: ExperimentConfig) -> int:
    handlers: dict[str, Callable[[], int]] = {
        "solve-threshold": lambda: cmd_solve_threshold(config),
        "solve-finite": lambda: cmd_solve_finite(config),
        "simulate": lambda: cmd_simulate(config, args.policy, args.constant_threshold),
        "oracle": lambda: cmd_oracle(config, Granularity(args.granularity)),
        "sweep": lambda: cmd_sweep(config, args.values),
        "check": lambda: cmd_check(config),
    }
    return handlers[args.command]()


def main(argv: list[str] | None = None) -> int:
    """Parse arguments, run one command, and return its exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s [%(name)s] %(levelname)s: %(message)s",
        datefmt="%H:%M:%S",
    )
    try:
        config = load_config(
            args.config, args.overrides, seed=args.seed, output_dir=args.output_dir
        )
        return _dispatch(args, config)
    except RemestError as e:
        code = exit_code_for(e)
        logger.error("%s: %s", type(e).__name__, e)
        print(f"error: {e}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
