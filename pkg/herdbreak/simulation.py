"""Monte Carlo runs of the buyers chain under a decision rule.

The hidden states and private observations of a run do not depend on what the
buyers do, so they are drawn up front from the replication's own generator.
All regimes then replay the same draws (common random numbers), and all
replications of a regime advance together, one period per loop iteration.
"""
from __future__ import annotations
import dataclasses
import math
from typing import Any, Sequence

import numpy as np

from herdbreak import beliefs
from herdbreak.beliefs import BoolArray, FloatArray, Int8Array, IntArray
from herdbreak.model import ACTION_PAIRS, ALL_GAMMAS, ActionPair, GammaFn, Params, reward
from herdbreak.solver import (
    GreedyChoice,
    PolicyTable,
    ValueTable,
    gamma_set_or_default,
    nearest_index,
)
from herdbreak.strategic import IncentiveScheme, MyopicChoice

# Every TRACKER_CHECK_EVERY periods, the belief of the first replication is
# recomputed from scratch over the next TRACKER_WINDOW periods.
TRACKER_CHECK_EVERY = 10_000
TRACKER_WINDOW = 100
TRACKER_TOLERANCE = 1e-9

REGIME_NAMES = ["team", "strategic", "incentivized", "incentivized_net"]


class TrackerDrift(RuntimeError):
    def __init__(self, period: int, tracked: float, replayed: float):
        super().__init__(
            f"belief tracker drifted at period {period}: {tracked!r} != {replayed!r}"
        )
        self.period = period
        self.tracked = tracked
        self.replayed = replayed


class DecisionRule:
    """Picks a gamma function for every public belief in an array."""

    def choose(self, points: FloatArray) -> IntArray:
        raise NotImplementedError


class TablePolicy(DecisionRule):
    def __init__(self, policy: PolicyTable):
        self.policy = policy
        self._ids = policy.gamma_ids

    def choose(self, points: FloatArray) -> IntArray:
        return self._ids[nearest_index(self.policy.grid, points)]


class GreedyTeamRule(DecisionRule):
    """One-step lookahead with the converged relative values, at the exact belief."""

    def __init__(
        self,
        params: Params,
        table: ValueTable,
        gamma_set: Sequence[GammaFn] | None = None,
    ):
        self.greedy = GreedyChoice(params, table, gamma_set_or_default(gamma_set))

    def choose(self, points: FloatArray) -> IntArray:
        return self.greedy(points)


class MyopicRule(DecisionRule):
    def __init__(
        self,
        params: Params,
        scheme: IncentiveScheme | None = None,
        gamma_set: Sequence[GammaFn] | None = None,
    ):
        self.myopic = MyopicChoice(params, gamma_set, scheme)

    def choose(self, points: FloatArray) -> IntArray:
        return self.myopic(points)


@dataclasses.dataclass(frozen=True, eq=False)
class Paths:
    states: Int8Array  # (replications, steps)
    observations: Int8Array

    @property
    def steps(self) -> int:
        return int(self.states.shape[1])


def replication_generators(seed: int, count: int) -> list[np.random.Generator]:
    """Replication i always gets child i of the seed, whatever count is."""
    return [
        np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(count)
    ]


def draw_paths(params: Params, rng: np.random.Generator, steps: int) -> Paths:
    first = rng.random() < params.initial_belief
    flips = rng.random(steps - 1) < params.epsilon
    crossovers = rng.random(steps) < params.p
    states = np.empty(steps, dtype=np.int8)
    states[0] = first
    states[1:] = (first + np.cumsum(flips)) % 2
    observations = states ^ crossovers.astype(np.int8)
    return Paths(states[None, :], observations[None, :])


def _stack(paths: Sequence[Paths]) -> Paths:
    return Paths(
        np.concatenate([p.states for p in paths]),
        np.concatenate([p.observations for p in paths]),
    )


@dataclasses.dataclass(frozen=True, eq=False)
class Trajectory:
    """Everything that happened in one replication, burn-in included."""

    states: Int8Array
    observations: Int8Array
    beliefs: FloatArray  # public belief before each period
    gamma_ids: IntArray
    outcome_ids: IntArray

    def replay(self, params: Params) -> list[float]:
        return beliefs.replay_beliefs(
            params,
            float(self.beliefs[0]),
            [ALL_GAMMAS[i] for i in self.gamma_ids],
            [ACTION_PAIRS[i] for i in self.outcome_ids],
        )


@dataclasses.dataclass(frozen=True)
class TrajectoryStats:
    avg_reward: float
    avg_payment: float
    frac_in_payset: float
    frac_learning: float
    frac_good_state: float
    horizon: int
    seed: int
    replication: int = 0
    trajectory: Trajectory | None = dataclasses.field(default=None, compare=False)


@dataclasses.dataclass(frozen=True, eq=False)
class OccupancyProfile:
    edges: FloatArray  # bins + 1
    mass: FloatArray
    in_payset: BoolArray  # per bin, by the bin midpoint

    def mass_in_payset(self) -> float:
        return math.fsum(self.mass[self.in_payset])


@dataclasses.dataclass
class _Counters:
    # pair_counts[r, 4*state + pair]
    pair_counts: IntArray
    paid: IntArray
    in_payset: IntArray
    learning: IntArray
    good: IntArray
    occupancy: IntArray

    @classmethod
    def zeros(cls, replications: int, bins: int) -> _Counters:
        def counter() -> IntArray:
            return np.zeros(replications, dtype=np.int64)

        return cls(
            np.zeros((replications, 8), dtype=np.int64),
            counter(),
            counter(),
            counter(),
            counter(),
            np.zeros((replications, bins), dtype=np.int64),
        )


def _reward_table(params: Params) -> list[float]:
    # indexed like _Counters.pair_counts columns
    return [reward(params, state, pair) for state in (0, 1) for pair in ACTION_PAIRS]


def _run(
    params: Params,
    rule: DecisionRule,
    paths: Paths,
    *,
    scheme: IncentiveScheme | None,
    pay: bool,
    bins: int,
    record: bool = False,
) -> tuple[_Counters, Trajectory | None]:
    replications = paths.states.shape[0]
    rows = np.arange(replications)
    counters = _Counters.zeros(replications, bins)
    current = np.full(replications, float(params.initial_belief))
    likelihoods = beliefs.outcome_likelihoods(params)

    recorded: dict[str, list[Any]] = {"beliefs": [], "gammas": [], "outcomes": []}
    window: tuple[float, list[GammaFn], list[ActionPair]] | None = None

    for t in range(paths.steps):
        states = paths.states[:, t]
        ids = rule.choose(current)
        outcomes = beliefs.PAIR_IDS[ids, paths.observations[:, t]]

        if t >= params.burn_in:
            counters.pair_counts[rows, 4 * states + outcomes] += 1
            counters.learning += beliefs.LEARNING[ids]
            counters.good += states
            bin_index = np.minimum((current * bins).astype(np.int64), bins - 1)
            counters.occupancy[rows, bin_index] += 1
            if scheme is not None:
                inside = scheme.contains_many(current)
                counters.in_payset += inside
                if pay:
                    counters.paid += inside & (beliefs.PAIR_REPORTS[outcomes] > 0)

        if record:
            recorded["beliefs"].append(current[0])
            recorded["gammas"].append(ids[0])
            recorded["outcomes"].append(outcomes[0])
        if t % TRACKER_CHECK_EVERY == 0:
            window = (float(current[0]), [], [])

        following = beliefs.update_beliefs(params, current, ids, outcomes, likelihoods)

        if window is not None:
            start, gammas, outcome_pairs = window
            gammas.append(ALL_GAMMAS[int(ids[0])])
            outcome_pairs.append(ACTION_PAIRS[int(outcomes[0])])
            if len(gammas) == TRACKER_WINDOW or t == paths.steps - 1:
                replayed = beliefs.replay_beliefs(params, start, gammas, outcome_pairs)
                if abs(replayed[-1] - following[0]) > TRACKER_TOLERANCE:
                    raise TrackerDrift(t, float(following[0]), replayed[-1])
                window = None
        current = following

    trajectory = None
    if record:
        trajectory = Trajectory(
            paths.states[0].copy(),
            paths.observations[0].copy(),
            np.array(recorded["beliefs"], dtype=np.float64),
            np.array(recorded["gammas"], dtype=np.int64),
            np.array(recorded["outcomes"], dtype=np.int64),
        )
    return (counters, trajectory)


def _stats(
    params: Params,
    counters: _Counters,
    amount: float,
    seed: int,
    row: int,
    replication: int,
    trajectory: Trajectory | None = None,
) -> TrajectoryStats:
    horizon = params.horizon
    rewards = _reward_table(params)
    total = math.fsum(int(n) * r for n, r in zip(counters.pair_counts[row], rewards))
    return TrajectoryStats(
        avg_reward=total / horizon,
        avg_payment=amount * int(counters.paid[row]) / horizon,
        frac_in_payset=int(counters.in_payset[row]) / horizon,
        frac_learning=int(counters.learning[row]) / horizon,
        frac_good_state=int(counters.good[row]) / horizon,
        horizon=horizon,
        seed=seed,
        replication=replication,
        trajectory=trajectory,
    )


def _profile(counts: IntArray, scheme: IncentiveScheme | None) -> OccupancyProfile:
    bins = len(counts)
    edges = np.linspace(0.0, 1.0, bins + 1)
    total = int(counts.sum())
    mass = counts / total
    if scheme is None:
        in_payset = np.zeros(bins, dtype=bool)
    else:
        in_payset = scheme.contains_many((edges[:-1] + edges[1:]) / 2)
    return OccupancyProfile(edges, mass, in_payset)


def simulate(
    params: Params,
    rule: DecisionRule,
    scheme: IncentiveScheme | None = None,
    seed: int | None = None,
    *,
    replication: int = 0,
    record: bool = False,
) -> TrajectoryStats:
    """Run one replication for burn_in + horizon periods, average over the horizon.

    The planner pays only when a scheme is given. The draws are those of
    replication number `replication` in compare_regimes with the same seed.
    """
    if seed is None:
        seed = params.seed
    rng = replication_generators(seed, replication + 1)[replication]
    paths = draw_paths(params, rng, params.burn_in + params.horizon)
    counters, trajectory = _run(
        params, rule, paths, scheme=scheme, pay=scheme is not None, bins=2, record=record
    )
    amount = scheme.amount if scheme is not None else 0.0
    return _stats(params, counters, amount, seed, 0, replication, trajectory)


def occupancy_profile(
    params: Params,
    rule: DecisionRule,
    seed: int | None = None,
    bins: int = 50,
    scheme: IncentiveScheme | None = None,
) -> OccupancyProfile:
    """Fraction of the horizon the public belief spends in each of `bins` equal bins."""
    if bins < 2:
        raise ValueError(f"bins must be at least 2, not {bins!r}")
    if seed is None:
        seed = params.seed
    rng = replication_generators(seed, 1)[0]
    paths = draw_paths(params, rng, params.burn_in + params.horizon)
    counters, junk = _run(params, rule, paths, scheme=scheme, pay=False, bins=bins)
    return _profile(counters.occupancy[0], scheme)


@dataclasses.dataclass(frozen=True)
class Estimate:
    mean: float
    se: float

    @classmethod
    def of(cls, values: Sequence[float]) -> Estimate:
        n = len(values)
        mean = math.fsum(values) / n
        if n < 2:
            return cls(mean, 0.0)
        variance = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
        return cls(mean, math.sqrt(variance / n))


@dataclasses.dataclass(frozen=True)
class RegimeSummary:
    avg_reward: Estimate
    avg_payment: Estimate
    frac_in_payset: Estimate
    frac_learning: Estimate
    frac_good_state: Estimate

    @classmethod
    def of(cls, runs: Sequence[TrajectoryStats]) -> RegimeSummary:
        return cls(
            Estimate.of([s.avg_reward for s in runs]),
            Estimate.of([s.avg_payment for s in runs]),
            Estimate.of([s.frac_in_payset for s in runs]),
            Estimate.of([s.frac_learning for s in runs]),
            Estimate.of([s.frac_good_state for s in runs]),
        )


@dataclasses.dataclass(frozen=True)
class RegimeInputs:
    team: DecisionRule
    strategic: DecisionRule
    incentivized: DecisionRule
    scheme: IncentiveScheme

    @classmethod
    def from_tables(
        cls,
        params: Params,
        value_table: ValueTable,
        team: PolicyTable,
        strategic: PolicyTable,
        incentivized: PolicyTable,
        scheme: IncentiveScheme,
        gamma_set: Sequence[GammaFn] | None = None,
        *,
        snap_to_grid: bool = False,
    ) -> RegimeInputs:
        if snap_to_grid:
            return cls(
                TablePolicy(team), TablePolicy(strategic), TablePolicy(incentivized), scheme
            )
        return cls(
            GreedyTeamRule(params, value_table, gamma_set),
            MyopicRule(params, None, gamma_set),
            MyopicRule(params, scheme, gamma_set),
            scheme,
        )


@dataclasses.dataclass(frozen=True, eq=False)
class ComparisonReport:
    horizon: int
    seed: int
    runs: dict[str, list[TrajectoryStats]]
    summaries: dict[str, RegimeSummary]
    # paired per-replication differences of avg_reward
    gaps: dict[str, Estimate]
    occupancy: OccupancyProfile


def compare_regimes(
    params: Params, inputs: RegimeInputs, *, bins: int = 50
) -> ComparisonReport:
    """Team, strategic and incentivized play on the same draws, one row per replication.

    Only the incentivized regime is paid. All regimes measure their time in the
    pay set, and incentivized_net is the incentivized reward minus the payment.
    """
    count = params.num_replications
    if count < 2:
        raise ValueError(f"comparing regimes needs at least 2 replications, not {count}")
    steps = params.burn_in + params.horizon
    paths = _stack(
        [draw_paths(params, rng, steps) for rng in replication_generators(params.seed, count)]
    )

    runs: dict[str, list[TrajectoryStats]] = {}
    occupancy = None
    for name, rule, pay in [
        ("team", inputs.team, False),
        ("strategic", inputs.strategic, False),
        ("incentivized", inputs.incentivized, True),
    ]:
        counters, junk = _run(
            params, rule, paths, scheme=inputs.scheme, pay=pay, bins=bins
        )
        amount = inputs.scheme.amount if pay else 0.0
        runs[name] = [
            _stats(params, counters, amount, params.seed, i, i) for i in range(count)
        ]
        if pay:
            occupancy = _profile(counters.occupancy.sum(axis=0), inputs.scheme)
    assert occupancy is not None

    runs["incentivized_net"] = [
        dataclasses.replace(s, avg_reward=s.avg_reward - s.avg_payment)
        for s in runs["incentivized"]
    ]

    def paired(first: str, second: str) -> Estimate:
        return Estimate.of(
            [a.avg_reward - b.avg_reward for a, b in zip(runs[first], runs[second])]
        )

    return ComparisonReport(
        horizon=params.horizon,
        seed=params.seed,
        runs=runs,
        summaries={name: RegimeSummary.of(runs[name]) for name in REGIME_NAMES},
        gaps={
            "team-incentivized": paired("team", "incentivized"),
            "incentivized-strategic": paired("incentivized", "strategic"),
            "team-strategic": paired("team", "strategic"),
        },
        occupancy=occupancy,
    )
