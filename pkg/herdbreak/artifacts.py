"""Output files and their loaders.

Every CSV file starts with one schema line,

    # herdbreak <kind> v1 key=value key=value ...

followed by an ordinary header row. Floats are written with repr(), so they
load back to the same bits and reruns give identical files.
"""
from __future__ import annotations
import csv
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from herdbreak.model import ALL_GAMMAS
from herdbreak.simulation import ComparisonReport, Estimate, OccupancyProfile, TrajectoryStats
from herdbreak.solver import PolicyTable, Regime, ValueTable
from herdbreak.strategic import CoincidenceSet, IncentiveScheme, true_runs

SCHEMA_VERSION = "v1"

_COLUMNS = {
    "value_function": ["belief", "value"],
    "policy": ["belief", "gamma_id", "gamma", "learning", "reports"],
    "coincidence": [
        "belief",
        "team_gamma_id",
        "strategic_gamma_id",
        "in_coincidence_set",
        "in_payset",
    ],
    "comparison": [
        "seed",
        "replication",
        "regime",
        "avg_reward",
        "avg_payment",
        "frac_in_payset",
        "frac_learning",
        "frac_good_state",
    ],
    "occupancy": ["bin_lo", "bin_hi", "mass", "in_payset"],
}


class SchemaError(ValueError):
    pass


def _format(value: object) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _write_csv(
    path: Path, kind: str, info: dict[str, object], rows: Iterable[Sequence[object]]
) -> Path:
    with path.open("w", encoding="utf-8", newline="") as file:
        details = "".join(f" {key}={_format(value)}" for key, value in info.items())
        file.write(f"# herdbreak {kind} {SCHEMA_VERSION}{details}\n")
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(_COLUMNS[kind])
        for row in rows:
            writer.writerow([_format(value) for value in row])
    return path


def _read_csv(path: Path, kind: str) -> tuple[dict[str, str], list[dict[str, str]]]:
    with path.open("r", encoding="utf-8", newline="") as file:
        words = file.readline().split()
        if words[:2] != ["#", "herdbreak"] or len(words) < 4:
            raise SchemaError(f"{path} does not start with a herdbreak schema line")
        if words[2] != kind or words[3] != SCHEMA_VERSION:
            raise SchemaError(
                f"{path} has schema '{words[2]} {words[3]}',"
                f" expected '{kind} {SCHEMA_VERSION}'"
            )
        info = dict(word.split("=", 1) for word in words[4:])
        reader = csv.DictReader(file)
        if reader.fieldnames != _COLUMNS[kind]:
            raise SchemaError(f"{path} has columns {reader.fieldnames}")
        return (info, list(reader))


def write_value_function(path: Path, table: ValueTable) -> Path:
    info = {
        "rho": table.rho,
        "ref_index": table.ref_index,
        "iterations": table.iterations,
        "span": table.span,
    }
    return _write_csv(path, "value_function", info, zip(table.grid, table.values))


def load_value_function(path: Path) -> ValueTable:
    info, rows = _read_csv(path, "value_function")
    return ValueTable(
        np.array([float(row["belief"]) for row in rows]),
        np.array([float(row["value"]) for row in rows]),
        float(info["rho"]),
        int(info["ref_index"]),
        int(info["iterations"]),
        float(info["span"]),
    )


def write_policy(path: Path, policy: PolicyTable) -> Path:
    rows = [
        (belief, gamma.id, str(gamma), gamma.learning, gamma.reports)
        for belief, gamma in zip(policy.grid, policy.choice)
    ]
    return _write_csv(path, "policy", {"regime": policy.regime.value}, rows)


def load_policy(path: Path) -> PolicyTable:
    info, rows = _read_csv(path, "policy")
    choice = []
    for row in rows:
        gamma = ALL_GAMMAS[int(row["gamma_id"])]
        if str(gamma) != row["gamma"]:
            raise SchemaError(f"gamma {row['gamma_id']} is not {row['gamma']!r}")
        choice.append(gamma)
    return PolicyTable(
        np.array([float(row["belief"]) for row in rows]),
        tuple(choice),
        Regime(info["regime"]),
    )


def write_coincidence(
    path: Path,
    team: PolicyTable,
    strategic: PolicyTable,
    cs: CoincidenceSet,
    scheme: IncentiveScheme,
) -> Path:
    rows = zip(cs.grid, team.gamma_ids, strategic.gamma_ids, cs.member, scheme.pay_mask)
    info = {"amount": scheme.amount}
    return _write_csv(path, "coincidence", info, rows)


def load_coincidence(path: Path) -> tuple[CoincidenceSet, IncentiveScheme]:
    info, rows = _read_csv(path, "coincidence")
    grid = np.array([float(row["belief"]) for row in rows])
    member = np.array([row["in_coincidence_set"] == "1" for row in rows])
    paid = np.array([row["in_payset"] == "1" for row in rows])
    scheme = IncentiveScheme(grid, true_runs(paid), float(info["amount"]))
    return (CoincidenceSet(grid, member), scheme)


def write_comparison_csv(path: Path, report: ComparisonReport) -> Path:
    rows = [
        (
            stats.seed,
            stats.replication,
            regime,
            stats.avg_reward,
            stats.avg_payment,
            stats.frac_in_payset,
            stats.frac_learning,
            stats.frac_good_state,
        )
        for regime, runs in report.runs.items()
        for stats in runs
    ]
    return _write_csv(path, "comparison", {"horizon": report.horizon}, rows)


def load_comparison_csv(path: Path) -> dict[str, list[TrajectoryStats]]:
    info, rows = _read_csv(path, "comparison")
    result: dict[str, list[TrajectoryStats]] = {}
    for row in rows:
        result.setdefault(row["regime"], []).append(
            TrajectoryStats(
                avg_reward=float(row["avg_reward"]),
                avg_payment=float(row["avg_payment"]),
                frac_in_payset=float(row["frac_in_payset"]),
                frac_learning=float(row["frac_learning"]),
                frac_good_state=float(row["frac_good_state"]),
                horizon=int(info["horizon"]),
                seed=int(row["seed"]),
                replication=int(row["replication"]),
            )
        )
    return result


def _estimate_json(estimate: Estimate) -> dict[str, float]:
    return {"mean": estimate.mean, "se": estimate.se}


def comparison_json(report: ComparisonReport) -> dict[str, Any]:
    return {
        "schema": f"herdbreak comparison {SCHEMA_VERSION}",
        "horizon": report.horizon,
        "seed": report.seed,
        "replications": len(report.runs["team"]),
        "regimes": {
            name: {
                field: _estimate_json(getattr(summary, field))
                for field in [
                    "avg_reward",
                    "avg_payment",
                    "frac_in_payset",
                    "frac_learning",
                    "frac_good_state",
                ]
            }
            for name, summary in report.summaries.items()
        },
        "paired_gaps": {name: _estimate_json(gap) for name, gap in report.gaps.items()},
        "occupancy_mass_in_payset": report.occupancy.mass_in_payset(),
    }


def write_json(path: Path, content: dict[str, Any]) -> Path:
    with path.open("w", encoding="utf-8") as file:
        json.dump(content, file, indent=2)
        file.write("\n")
    return path


def load_json(path: Path, schema: str | None = None) -> dict[str, Any]:
    with path.open("r", encoding="utf-8") as file:
        result: dict[str, Any] = json.load(file)
    if schema is not None and result.get("schema") != f"herdbreak {schema} {SCHEMA_VERSION}":
        raise SchemaError(f"{path} is not a herdbreak {schema} {SCHEMA_VERSION} file")
    return result


def write_occupancy(path: Path, profile: OccupancyProfile) -> Path:
    rows = zip(profile.edges[:-1], profile.edges[1:], profile.mass, profile.in_payset)
    return _write_csv(path, "occupancy", {"bins": len(profile.mass)}, rows)


def load_occupancy(path: Path) -> OccupancyProfile:
    info, rows = _read_csv(path, "occupancy")
    edges = [float(row["bin_lo"]) for row in rows] + [float(rows[-1]["bin_hi"])]
    return OccupancyProfile(
        np.array(edges),
        np.array([float(row["mass"]) for row in rows]),
        np.array([row["in_payset"] == "1" for row in rows]),
    )
