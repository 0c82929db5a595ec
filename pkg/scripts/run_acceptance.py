"""Acceptance run -- ``remest check`` over every shipped experiment.

Usage:
    python scripts/run_acceptance.py
    python scripts/run_acceptance.py --configs configs/experiments/calibration_finite.yaml
    python scripts/run_acceptance.py --set simulation.n_reps=20000

Each config is checked into ``<output-root>/<config stem>/``; a JSON summary
of every check lands in ``<output-root>/acceptance_summary.json``.

Exit code 0 if every config passes, 1 if any fail.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

# Ensure project root is on the import path
PROJECT_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(PROJECT_ROOT))

from remest.cli import EXIT_OK, main as remest_main  # noqa: E402

logger = logging.getLogger("run_acceptance")

DEFAULT_CONFIG_DIR = PROJECT_ROOT / "configs" / "experiments"


# ---------------------------------------------------------------------------
# Core logic
# ---------------------------------------------------------------------------


def _check_config(path: Path, output_root: Path, overrides: list[str]) -> dict:
    """Run ``remest check`` on one config.

    Args:
        path: Experiment YAML.
        output_root: Parent of the per-config output directories.
        overrides: ``section.key=value`` assignments passed through.

    Returns:
        Summary dict for JSON output.
    """
    output_dir = output_root / path.stem
    argv = ["check", str(path), "--output-dir", str(output_dir)]
    for assignment in overrides:
        argv += ["--set", assignment]

    started = time.monotonic()
    code = remest_main(argv)
    elapsed = time.monotonic() - started

    report_path = output_dir / "check_report.json"
    checks: dict[str, bool] = {}
    if report_path.exists():
        with open(report_path, encoding="utf-8") as f:
            report = json.load(f)
        checks = {name: bool(check["passed"]) for name, check in report["checks"].items()}
    return {
        "config": str(path),
        "exit_code": code,
        "passed": code == EXIT_OK,
        "elapsed_s": round(elapsed, 2),
        "checks": checks,
    }


def _write_summary(output_root: Path, results: list[dict]) -> Path:
    output_root.mkdir(parents=True, exist_ok=True)
    output_path = output_root / "acceptance_summary.json"
    summary = {
        "results": results,
        "overall_pass": all(r["passed"] for r in results),
    }
    with open(output_path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return output_path


def run_acceptance(configs: list[Path], output_root: Path, overrides: list[str]) -> bool:
    """Check every config in order and write the summary.

    Returns:
        True if every config passed.
    """
    results: list[dict] = []
    for path in configs:
        logger.info("--- Checking: %s ---", path.name)
        result = _check_config(path, output_root, overrides)
        results.append(result)
        failed = [name for name, ok in result["checks"].items() if not ok]
        logger.info(
            "  %s | exit=%d | %.1fs | failed=%s",
            "PASS" if result["passed"] else "FAIL",
            result["exit_code"],
            result["elapsed_s"],
            ", ".join(failed) or "none",
        )

    output_path = _write_summary(output_root, results)
    overall_pass = all(r["passed"] for r in results)
    logger.info("---")
    logger.info("Overall: %s", "PASS" if overall_pass else "FAIL")
    logger.info("Summary written to: %s", output_path)
    return overall_pass


# ---------------------------------------------------------------------------
# CLI entry point
# ---------------------------------------------------------------------------


def main() -> None:
    """Parse arguments and run the acceptance checks."""
    parser = argparse.ArgumentParser(
        description="Run remest check over the shipped experiment configs.",
    )
    parser.add_argument(
        "--configs",
        type=Path,
        nargs="+",
        default=None,
        help="Configs to check (default: every configs/experiments/*.yaml).",
    )
    parser.add_argument(
        "--output-root",
        type=Path,
        default=Path("results/acceptance"),
        help="Directory for per-config outputs and the summary (default: results/acceptance).",
    )
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="Config override applied to every run. Repeatable.",
    )
    args = parser.parse_args()

    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s [%(name)s] %(levelname)s: %(message)s",
        datefmt="%H:%M:%S",
    )

    configs = args.configs or sorted(DEFAULT_CONFIG_DIR.glob("*.yaml"))
    if not configs:
        print(f"no configs found in {DEFAULT_CONFIG_DIR}", file=sys.stderr)
        sys.exit(1)

    passed = run_acceptance(configs, args.output_root, args.overrides)
    sys.exit(0 if passed else 1)


if __name__ == "__main__":
    main()
