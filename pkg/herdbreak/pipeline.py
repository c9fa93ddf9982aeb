"""This file runs the stages behind subcommands like `solve` and `all`."""
from __future__ import annotations
import dataclasses
import platform
import time
from pathlib import Path
from typing import Any, Callable, TypeVar

import numpy as np

import herdbreak
from herdbreak import artifacts, beliefs, config, simulation, solver, strategic
from herdbreak.model import ALL_GAMMAS, GammaFn, Params
from herdbreak.runlog import RunLog

EXIT_OK = 0
EXIT_BAD_CONFIG = 1
EXIT_SOLVER_FAILED = 2
EXIT_IO_FAILED = 3

# residual of the interpolated solution is checked at this many off-grid beliefs
_RESIDUAL_POINTS = 100


@dataclasses.dataclass
class _Run:
    run_config: config.RunConfig
    params: Params
    gamma_set: list[GammaFn] | None
    out_dir: Path
    log: RunLog
    written: list[Path] = dataclasses.field(default_factory=list)
    value_table: solver.ValueTable | None = None
    team_policy: solver.PolicyTable | None = None
    strategic_policy: solver.PolicyTable | None = None
    coincidence: strategic.CoincidenceSet | None = None
    scheme: strategic.IncentiveScheme | None = None
    incentivized_policy: solver.PolicyTable | None = None
    report: simulation.ComparisonReport | None = None

    def output(self, name: str) -> Path:
        path = self.out_dir / name
        self.written.append(path)
        return path


_StageT = TypeVar("_StageT", bound=Callable[[_Run], None])
_stages: dict[str, Callable[[_Run], None]] = {}

# what each subcommand runs, in order
SUBCOMMANDS = {
    "solve": ["solve"],
    "strategic": ["strategic"],
    "mechanism": ["solve", "strategic", "mechanism"],
    "simulate": ["solve", "strategic", "mechanism", "simulate"],
    "all": ["solve", "strategic", "mechanism", "simulate"],
}


def add_stage(name: str) -> Callable[[_StageT], _StageT]:
    assert name not in _stages

    def do_it(func: _StageT) -> _StageT:
        _stages[name] = func
        return func

    return do_it


@add_stage("solve")
def _solve(run: _Run) -> None:
    value_table, team = solver.solve_average_reward(
        run.params, run.gamma_set, progress=run.log.solver_progress("solve")
    )
    run.value_table = value_table
    run.team_policy = team
    run.log.add_message(
        "solve",
        f"converged in {value_table.iterations} iterations, rho = {value_table.rho!r}",
    )
    artifacts.write_value_function(run.output("value_function.csv"), value_table)
    artifacts.write_policy(run.output("team_policy.csv"), team)


@add_stage("strategic")
def _strategic(run: _Run) -> None:
    run.strategic_policy = strategic.strategic_policy(run.params, run.gamma_set)
    artifacts.write_policy(run.output("strategic_policy.csv"), run.strategic_policy)
    intervals = solver.learning_intervals(run.strategic_policy)
    run.log.add_message("strategic", f"buyers learn on {_show_intervals(intervals)}")


@add_stage("mechanism")
def _mechanism(run: _Run) -> None:
    assert run.team_policy is not None and run.strategic_policy is not None
    run.coincidence = strategic.coincidence_set(run.team_policy, run.strategic_policy)
    run.scheme = strategic.build_incentives(
        run.params,
        run.coincidence,
        pay_on_difference_set=run.run_config["pay_on_difference_set"],
        extra_bonus_delta=run.run_config["extra_bonus_delta"],
    )
    run.incentivized_policy = strategic.incentivized_policy(run.params, run.scheme, run.gamma_set)
    share = float(np.mean(run.coincidence.member))
    run.log.add_message(
        "mechanism",
        f"policies coincide on {share:.1%} of the grid,"
        f" paying {run.scheme.amount!r} per report on"
        f" {_show_intervals(run.scheme.pay_intervals())}",
    )
    artifacts.write_coincidence(
        run.output("coincidence.csv"),
        run.team_policy,
        run.strategic_policy,
        run.coincidence,
        run.scheme,
    )
    artifacts.write_policy(run.output("incentivized_policy.csv"), run.incentivized_policy)


@add_stage("simulate")
def _simulate(run: _Run) -> None:
    assert run.value_table is not None and run.scheme is not None
    assert run.team_policy is not None and run.strategic_policy is not None
    assert run.incentivized_policy is not None
    inputs = simulation.RegimeInputs.from_tables(
        run.params,
        run.value_table,
        run.team_policy,
        run.strategic_policy,
        run.incentivized_policy,
        run.scheme,
        run.gamma_set,
        snap_to_grid=run.run_config["snap_to_grid"],
    )
    run.log.add_message(
        "simulate",
        f"{run.params.num_replications} replications of"
        f" {run.params.burn_in} + {run.params.horizon} periods",
    )
    run.report = simulation.compare_regimes(
        run.params, inputs, bins=run.run_config["occupancy_bins"]
    )
    for name, summary in run.report.summaries.items():
        run.log.add_message(
            "simulate",
            f"{name}: average reward {summary.avg_reward.mean:.6f}"
            f" (se {summary.avg_reward.se:.2e}),"
            f" average payment {summary.avg_payment.mean:.6f}",
        )
    artifacts.write_comparison_csv(run.output("comparison.csv"), run.report)
    artifacts.write_json(
        run.output("comparison.json"), artifacts.comparison_json(run.report)
    )
    artifacts.write_occupancy(run.output("occupancy.csv"), run.report.occupancy)


def _show_intervals(intervals: list[tuple[float, float]]) -> str:
    if not intervals:
        return "no beliefs"
    return ", ".join(f"[{lo:.3f}, {hi:.3f}]" for lo, hi in intervals)


def _grid_gains(run: _Run) -> dict[str, float | None]:
    result: dict[str, float | None] = {}
    for name, policy in [
        ("team", run.team_policy),
        ("strategic", run.strategic_policy),
        ("incentivized", run.incentivized_policy),
    ]:
        if policy is None:
            continue
        try:
            result[name] = solver.evaluate_policy(run.params, policy).rho
        except solver.SolverDidNotConverge as e:
            run.log.add_message("metadata", f"cannot evaluate {name} policy: {e}")
            result[name] = None
    return result


def _off_grid_residual(run: _Run) -> float | None:
    if run.value_table is None or run.team_policy is None:
        return None
    grid = run.value_table.grid
    cells = np.linspace(0, len(grid) - 2, min(_RESIDUAL_POINTS, len(grid) - 1))
    points = [(grid[i] + grid[i + 1]) / 2 for i in np.unique(cells.astype(np.int64))]
    return max(
        solver.bellman_residual(run.params, run.value_table, run.team_policy, point, run.gamma_set)
        for point in points
    )


def _metadata(run: _Run, command: str, stages: list[str], started: float) -> dict[str, Any]:
    policies = {
        "team": run.team_policy,
        "strategic": run.strategic_policy,
        "incentivized": run.incentivized_policy,
    }
    grid = solver.make_grid(run.params.grid_size)
    result: dict[str, Any] = {
        "schema": f"herdbreak metadata {artifacts.SCHEMA_VERSION}",
        "command": command,
        "stages": stages,
        "config": dict(run.run_config),
        "switches": {
            "pay_on_difference_set": run.run_config["pay_on_difference_set"],
            "extra_bonus_delta": run.run_config["extra_bonus_delta"],
            "include_dominated": run.run_config["include_dominated"],
            "snap_to_grid": run.run_config["snap_to_grid"],
        },
        "tie_break": {
            "team_and_strategic": "learning gamma first, then canonical gamma order",
            "incentivized_in_payset": (
                "learning and reporting first, then learning, then canonical gamma order"
            ),
            "tolerance": f"{solver.TIE_TOLERANCE!r} * max(1, |best value|)",
        },
        "grid": {
            "points": run.params.grid_size,
            "reference_belief": float(grid[solver.reference_index(grid)]),
            "interpolation": "linear",
            "payset_membership": "nearest grid point",
        },
        "rng": {
            "bit_generator": "PCG64",
            "streams": "SeedSequence(seed).spawn(num_replications), child i per replication",
        },
        "version": herdbreak.__version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "learning_intervals": {
            name: solver.learning_intervals(policy)
            for name, policy in policies.items()
            if policy is not None
        },
    }
    if run.value_table is not None:
        result["solver"] = {
            "rho": run.value_table.rho,
            "iterations": run.value_table.iterations,
            "span": run.value_table.span,
            "max_off_grid_residual": _off_grid_residual(run),
        }
    if run.scheme is not None:
        result["payset_intervals"] = run.scheme.pay_intervals()
        result["payment_per_report"] = run.scheme.amount
    result["grid_gains"] = _grid_gains(run)
    result["wall_clock"] = {
        "started": time.asctime(time.localtime(started)),
        "seconds": time.time() - started,
    }
    return result


def _remove_partial_outputs(run: _Run) -> None:
    for path in run.written:
        try:
            path.unlink()
        except FileNotFoundError:
            pass
    run.written.clear()


def run_pipeline(
    run_config: config.RunConfig, command: str = "all", *, log: RunLog | None = None
) -> int:
    """Run the stages of a subcommand, write their files, return an exit code."""
    if log is None:
        log = RunLog()
    violations = config.validate_config(run_config)
    if violations:
        for violation in violations:
            print(f"invalid config: {violation}")
        return EXIT_BAD_CONFIG

    started = time.time()
    stages = SUBCOMMANDS[command]
    run = _Run(
        run_config=run_config,
        params=config.params_from_config(run_config),
        gamma_set=list(ALL_GAMMAS) if run_config["include_dominated"] else None,
        out_dir=Path(run_config["out_dir"]),
        log=log,
    )

    try:
        run.out_dir.mkdir(parents=True, exist_ok=True)
        log.open_log_file(run.out_dir / "run.log")
        log.add_message("pipeline", f"running {command}: {' -> '.join(stages)}")
        config.save_to_file(run.output("config.json"), run_config)
        for name in stages:
            _stages[name](run)
        artifacts.write_json(
            run.output("run_metadata.json"), _metadata(run, command, stages, started)
        )
        log.add_message("pipeline", f"wrote {len(run.written)} files to {run.out_dir}")
        return EXIT_OK
    except (
        solver.SolverDidNotConverge,
        beliefs.ZeroProbabilityOutcome,
        simulation.TrackerDrift,
    ) as e:
        log.add_message("pipeline", f"solver failed: {e}")
        _remove_partial_outputs(run)
        return EXIT_SOLVER_FAILED
    except OSError as e:
        log.add_message("pipeline", f"cannot write output: {e}")
        _remove_partial_outputs(run)
        return EXIT_IO_FAILED
    finally:
        log.close_log_file()
