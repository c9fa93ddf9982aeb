"""Average-reward dynamic program of the social planner, on a belief grid.

Relative value iteration: back up V on every grid point, subtract the value at
the reference point (belief 0.5), stop when the span of the change of the
un-normalized backup is below vi_tol. V between grid points is linear
interpolation, which keeps the backup monotone.
"""
from __future__ import annotations
import dataclasses
import enum
from typing import Callable, Sequence

import numpy as np

from herdbreak import beliefs
from herdbreak.beliefs import FloatArray, IntArray
from herdbreak.model import (
    ALL_GAMMAS,
    GammaFn,
    Params,
    canonical_order,
    nondominated_gammas,
)

# Relative to max(1, |best value|). Values closer than this to the best count as ties.
TIE_TOLERANCE = 1e-12

ProgressCallback = Callable[[int, float], None]


class SolverDidNotConverge(RuntimeError):
    def __init__(self, span: float, iterations: int):
        super().__init__(
            f"relative value iteration did not converge in {iterations} iterations"
            f" (span of last change: {span!r})"
        )
        self.span = span
        self.iterations = iterations


class Regime(enum.Enum):
    TEAM = "team"
    STRATEGIC = "strategic"
    INCENTIVIZED = "incentivized"


def _frozen(array: FloatArray) -> FloatArray:
    array = np.array(array)
    array.setflags(write=False)
    return array


@dataclasses.dataclass(frozen=True, eq=False)
class ValueTable:
    grid: FloatArray
    values: FloatArray
    rho: float
    ref_index: int
    iterations: int = 0
    span: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "grid", _frozen(self.grid))
        object.__setattr__(self, "values", _frozen(self.values))
        assert self.grid.shape == self.values.shape
        assert np.all(np.diff(self.grid) > 0)


@dataclasses.dataclass(frozen=True, eq=False)
class PolicyTable:
    grid: FloatArray
    choice: tuple[GammaFn, ...]
    regime: Regime

    def __post_init__(self) -> None:
        object.__setattr__(self, "grid", _frozen(self.grid))
        object.__setattr__(self, "choice", tuple(self.choice))
        assert len(self.choice) == len(self.grid)
        assert all(gamma in ALL_GAMMAS for gamma in self.choice)

    @property
    def gamma_ids(self) -> IntArray:
        return beliefs.gamma_ids(self.choice)

    def lookup(self, belief: float) -> GammaFn:
        return self.choice[int(nearest_index(self.grid, np.array([belief]))[0])]


def make_grid(size: int) -> FloatArray:
    return np.linspace(0.0, 1.0, size)


def reference_index(grid: FloatArray) -> int:
    return int(np.argmin(np.abs(grid - 0.5)))


def nearest_index(grid: FloatArray, points: FloatArray) -> IntArray:
    step = grid[1] - grid[0]
    return np.clip(np.rint((points - grid[0]) / step), 0, len(grid) - 1).astype(np.int64)


def interpolation_weights(
    grid: FloatArray, points: FloatArray
) -> tuple[IntArray, FloatArray]:
    """Left neighbour index and weight of the right neighbour, for any shape of points."""
    high = np.clip(np.searchsorted(grid, points, side="right"), 1, len(grid) - 1)
    low = high - 1
    weight = (points - grid[low]) / (grid[high] - grid[low])
    return (low, weight)


def _interpolate_with(values: FloatArray, low: IntArray, weight: FloatArray) -> FloatArray:
    return values[low] + weight * (values[low + 1] - values[low])


def interpolate(grid: FloatArray, values: FloatArray, points: FloatArray) -> FloatArray:
    return _interpolate_with(values, *interpolation_weights(grid, np.asarray(points)))


def choose_best(values: FloatArray, ranks: IntArray) -> IntArray:
    """Column of the best value in each row.

    Near-ties go to the column of lowest rank, then to the leftmost column.
    Columns are in canonical gamma order.
    """
    best = values.max(axis=1, keepdims=True)
    tied = values >= best - TIE_TOLERANCE * np.maximum(1.0, np.abs(best))
    ranked = np.where(tied, ranks, np.iinfo(np.int64).max)
    return np.argmin(ranked, axis=1)


def learning_first_ranks(gammas: Sequence[GammaFn]) -> IntArray:
    # learning gammas win ties against non-learning ones
    return np.array([0 if gamma.learning else 1 for gamma in gammas], dtype=np.int64)


def gamma_set_or_default(gamma_set: Sequence[GammaFn] | None) -> list[GammaFn]:
    if gamma_set is None:
        return nondominated_gammas()
    return canonical_order(list(gamma_set))


class _BellmanOperator:
    """Q-values of every (grid point, gamma) as a function of V on the grid.

    Rewards, branch probabilities and interpolation weights of the successor
    beliefs do not depend on V, so they are computed once.
    """

    def __init__(
        self, rewards: FloatArray, probs: FloatArray, low: IntArray, weight: FloatArray
    ):
        self.rewards = rewards
        self.probs = probs
        self.low = low
        self.weight = weight

    @classmethod
    def for_grid(
        cls, params: Params, grid: FloatArray, gammas: Sequence[GammaFn]
    ) -> _BellmanOperator:
        tables = beliefs.GammaTables(params, gammas)
        probs, nexts = tables.successors(grid)
        return cls(
            tables.rewards(grid),
            probs,
            *interpolation_weights(grid, nexts),
        )

    def restricted(self, columns: IntArray) -> _BellmanOperator:
        """Same operator with one fixed gamma column per grid point."""
        rows = np.arange(len(columns))
        return _BellmanOperator(
            self.rewards[rows, columns][:, None],
            self.probs[rows, columns][:, None],
            self.low[rows, columns][:, None],
            self.weight[rows, columns][:, None],
        )

    def __call__(self, values: FloatArray) -> FloatArray:
        continuation = _interpolate_with(values, self.low, self.weight)
        return self.rewards + (self.probs * continuation).sum(axis=2)


def _relative_value_iteration(
    params: Params,
    operator: _BellmanOperator,
    ref_index: int,
    progress: ProgressCallback | None,
    progress_every: int,
) -> tuple[FloatArray, FloatArray, int, float]:
    """Returns (V, Q-values of the final backup of V, iterations, final span)."""
    values = np.zeros(operator.rewards.shape[0])
    previous = None
    span = float("inf")
    for iteration in range(1, params.max_iters + 1):
        q = operator(values)
        backup = q.max(axis=1)
        if previous is not None:
            change = backup - previous
            span = float(change.max() - change.min())
            if progress is not None and iteration % progress_every == 0:
                progress(iteration, span)
            if span < params.vi_tol:
                return (values, q, iteration, span)
        previous = backup
        values = backup - backup[ref_index]
    raise SolverDidNotConverge(span, params.max_iters)


def solve_average_reward(
    params: Params,
    gamma_set: Sequence[GammaFn] | None = None,
    *,
    progress: ProgressCallback | None = None,
    progress_every: int = 1000,
) -> tuple[ValueTable, PolicyTable]:
    gammas = gamma_set_or_default(gamma_set)
    grid = make_grid(params.grid_size)
    ref_index = reference_index(grid)
    operator = _BellmanOperator.for_grid(params, grid, gammas)
    values, q, iterations, span = _relative_value_iteration(
        params, operator, ref_index, progress, progress_every
    )
    rho = float(q.max(axis=1)[ref_index])
    columns = choose_best(q, learning_first_ranks(gammas))
    value_table = ValueTable(grid, values, rho, ref_index, iterations, span)
    policy = PolicyTable(grid, tuple(gammas[i] for i in columns), Regime.TEAM)
    return (value_table, policy)


def evaluate_policy(
    params: Params,
    policy: PolicyTable,
    *,
    progress: ProgressCallback | None = None,
    progress_every: int = 1000,
) -> ValueTable:
    """Gain and relative values of a fixed grid policy (no maximization)."""
    grid = policy.grid
    ref_index = reference_index(grid)
    operator = _BellmanOperator.for_grid(params, grid, ALL_GAMMAS).restricted(policy.gamma_ids)
    values, q, iterations, span = _relative_value_iteration(
        params, operator, ref_index, progress, progress_every
    )
    return ValueTable(grid, values, float(q[ref_index, 0]), ref_index, iterations, span)


class GreedyChoice:
    """One-step lookahead on a solved value table, at arbitrary (off-grid) beliefs."""

    def __init__(self, params: Params, table: ValueTable, gamma_set: Sequence[GammaFn]):
        self.table = table
        self.tables = beliefs.GammaTables(params, canonical_order(list(gamma_set)))
        self.ranks = learning_first_ranks(self.tables.gammas)

    def q_values(self, points: FloatArray) -> FloatArray:
        probs, nexts = self.tables.successors(points)
        continuation = interpolate(self.table.grid, self.table.values, nexts)
        return self.tables.rewards(points) + (probs * continuation).sum(axis=2)

    def columns(self, points: FloatArray) -> IntArray:
        return choose_best(self.q_values(points), self.ranks)

    def __call__(self, points: FloatArray) -> IntArray:
        """Canonical ids of the greedy gammas."""
        return self.tables.ids[self.columns(points)]


def bellman_backup(
    params: Params, table: ValueTable, belief: float, gamma_set: Sequence[GammaFn]
) -> tuple[float, GammaFn]:
    greedy = GreedyChoice(params, table, gamma_set)
    points = np.array([belief])
    column = int(greedy.columns(points)[0])
    return (float(greedy.q_values(points)[0, column]), greedy.tables.gammas[column])


def greedy_choice(
    params: Params, table: ValueTable, points: FloatArray, gamma_set: Sequence[GammaFn]
) -> IntArray:
    return GreedyChoice(params, table, gamma_set)(np.asarray(points, dtype=np.float64))


def bellman_residual(
    params: Params,
    value_table: ValueTable,
    policy: PolicyTable,
    belief: float,
    gamma_set: Sequence[GammaFn] | None = None,
) -> float:
    assert np.array_equal(value_table.grid, policy.grid)
    best, junk = bellman_backup(params, value_table, belief, gamma_set_or_default(gamma_set))
    here = float(interpolate(value_table.grid, value_table.values, np.array([belief]))[0])
    return abs(value_table.rho + here - best)


def learning_intervals(policy: PolicyTable) -> list[tuple[float, float]]:
    """Maximal runs of grid points where the policy learns, as (first, last) beliefs."""
    result = []
    start = None
    for i, gamma in enumerate(policy.choice):
        if gamma.learning and start is None:
            start = i
        if not gamma.learning and start is not None:
            result.append((float(policy.grid[start]), float(policy.grid[i - 1])))
            start = None
    if start is not None:
        result.append((float(policy.grid[start]), float(policy.grid[-1])))
    return result
