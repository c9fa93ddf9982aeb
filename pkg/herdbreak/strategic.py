"""Selfish buyers, and the report subsidy that brings them closer to the team."""
from __future__ import annotations
import dataclasses
from typing import Sequence

import numpy as np

from herdbreak import beliefs
from herdbreak.beliefs import BoolArray, FloatArray, IntArray
from herdbreak.model import ALL_GAMMAS, ActionPair, GammaFn, Params
from herdbreak.solver import (
    PolicyTable,
    Regime,
    choose_best,
    gamma_set_or_default,
    learning_first_ranks,
    make_grid,
    nearest_index,
)


class GridMismatch(ValueError):
    pass


def true_runs(mask: BoolArray) -> tuple[tuple[int, int], ...]:
    """Half-open index ranges [start, stop) where mask is true."""
    padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return tuple((int(start), int(stop)) for start, stop in zip(edges[0::2], edges[1::2]))


@dataclasses.dataclass(frozen=True, eq=False)
class CoincidenceSet:
    grid: FloatArray
    member: BoolArray  # one per grid point

    def __post_init__(self) -> None:
        member = np.array(self.member, dtype=bool)
        assert member.shape == self.grid.shape
        member.setflags(write=False)
        object.__setattr__(self, "member", member)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CoincidenceSet):
            return NotImplemented
        return np.array_equal(self.grid, other.grid) and np.array_equal(
            self.member, other.member
        )


@dataclasses.dataclass(frozen=True, eq=False)
class IncentiveScheme:
    grid: FloatArray
    pay_ranges: tuple[tuple[int, int], ...]
    amount: float
    _mask: BoolArray = dataclasses.field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.amount < 0:
            raise ValueError(f"amount must be nonnegative, not {self.amount!r}")
        mask = np.zeros(len(self.grid), dtype=bool)
        for start, stop in self.pay_ranges:
            assert 0 <= start < stop <= len(self.grid)
            mask[start:stop] = True
        mask.setflags(write=False)
        object.__setattr__(self, "_mask", mask)

    @property
    def pay_mask(self) -> BoolArray:
        return self._mask

    def pay_intervals(self) -> list[tuple[float, float]]:
        return [(float(self.grid[a]), float(self.grid[b - 1])) for a, b in self.pay_ranges]

    # An exact belief is in the pay set when its nearest grid point is
    def contains_many(self, points: FloatArray) -> BoolArray:
        return self.pay_mask[nearest_index(self.grid, np.asarray(points))]

    def contains(self, belief: float) -> bool:
        return bool(self.contains_many(np.array([belief]))[0])


def transfer(scheme: IncentiveScheme, belief: float, outcome: ActionPair) -> float:
    """t(belief, a, b), negative when the planner pays the buyer."""
    if outcome.reports and scheme.contains(belief):
        return -scheme.amount
    return 0.0


def subsidized_ranks(gammas: Sequence[GammaFn]) -> IntArray:
    # inside the pay set: learning and reporting, then learning, then the rest
    return np.array(
        [0 if g.learning and g.reports else 1 if g.learning else 2 for g in gammas],
        dtype=np.int64,
    )


class MyopicChoice:
    """The gammas a selfish buyer picks, as canonical ids, for any belief array.

    With a scheme, the subsidy enters as amount * P(report), and where it is
    paid the buyer breaks ties toward learning gammas that report.
    """

    def __init__(
        self,
        params: Params,
        gamma_set: Sequence[GammaFn] | None = None,
        scheme: IncentiveScheme | None = None,
    ):
        self.tables = beliefs.GammaTables(params, gamma_set_or_default(gamma_set))
        self.scheme = scheme if scheme is not None and scheme.amount > 0 else None
        self.amount = 0.0 if self.scheme is None else self.scheme.amount
        self.ranks = learning_first_ranks(self.tables.gammas)
        self.subsidized_ranks = subsidized_ranks(self.tables.gammas)

    def _values(self, points: FloatArray, paid: BoolArray) -> FloatArray:
        subsidy = paid[:, None] * self.tables.report_probabilities(points)
        return self.tables.rewards(points) + self.amount * subsidy

    def values(self, points: FloatArray) -> FloatArray:
        """Expected reward plus expected subsidy, shaped (beliefs, gammas)."""
        points = np.asarray(points, dtype=np.float64)
        return self._values(points, self._paid(points))

    def _paid(self, points: FloatArray) -> BoolArray:
        if self.scheme is None:
            return np.zeros(len(points), dtype=bool)
        return self.scheme.contains_many(points)

    def __call__(self, points: FloatArray) -> IntArray:
        points = np.asarray(points, dtype=np.float64)
        paid = self._paid(points)
        ranks = np.where(paid[:, None], self.subsidized_ranks, self.ranks)
        return self.tables.ids[choose_best(self._values(points, paid), ranks)]


def myopic_choice(
    params: Params,
    points: FloatArray,
    gamma_set: Sequence[GammaFn] | None = None,
    scheme: IncentiveScheme | None = None,
) -> IntArray:
    """Canonical ids of the gammas a selfish buyer picks at each belief."""
    return MyopicChoice(params, gamma_set, scheme)(points)


def _policy_on_grid(params: Params, ids: IntArray, regime: Regime) -> PolicyTable:
    return PolicyTable(
        make_grid(params.grid_size), tuple(ALL_GAMMAS[i] for i in ids), regime
    )


def strategic_policy(
    params: Params, gamma_set: Sequence[GammaFn] | None = None
) -> PolicyTable:
    ids = myopic_choice(params, make_grid(params.grid_size), gamma_set)
    return _policy_on_grid(params, ids, Regime.STRATEGIC)


def coincidence_set(team: PolicyTable, strategic: PolicyTable) -> CoincidenceSet:
    if not np.array_equal(team.grid, strategic.grid):
        raise GridMismatch(
            f"policies are on different grids ({len(team.grid)} and"
            f" {len(strategic.grid)} points)"
        )
    member = np.array([a == b for a, b in zip(team.choice, strategic.choice)], dtype=bool)
    return CoincidenceSet(team.grid, member)


def build_incentives(
    params: Params,
    cs: CoincidenceSet,
    *,
    pay_on_difference_set: bool = True,
    extra_bonus_delta: float = 0.0,
) -> IncentiveScheme:
    """Pay c (plus an optional bonus) for every report where the policies differ.

    With pay_on_difference_set=False, pay where they coincide instead, which is
    what the indicator I(pi in S) says when read literally.
    """
    if extra_bonus_delta < 0:
        raise ValueError(f"extra_bonus_delta must be nonnegative, not {extra_bonus_delta!r}")
    mask = ~cs.member if pay_on_difference_set else cs.member
    return IncentiveScheme(cs.grid, true_runs(mask), params.c + extra_bonus_delta)


def incentivized_policy(
    params: Params, scheme: IncentiveScheme, gamma_set: Sequence[GammaFn] | None = None
) -> PolicyTable:
    grid = make_grid(params.grid_size)
    if not np.array_equal(grid, scheme.grid):
        raise GridMismatch("incentive scheme was built on a different grid")
    ids = myopic_choice(params, grid, gamma_set, scheme)
    return _policy_on_grid(params, ids, Regime.INCENTIVIZED)
