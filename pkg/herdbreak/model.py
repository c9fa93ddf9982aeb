"""Primitive objects of the buyers model: states, signals, actions, rewards."""
from __future__ import annotations
import dataclasses
import enum
import itertools
import numbers
from typing import Any, Callable


class State(enum.IntEnum):
    BAD = 0
    GOOD = 1


class Observation(enum.IntEnum):
    LOW = 0
    HIGH = 1


# Never do arithmetic with this, "*" is not a number
class Report(enum.Enum):
    SILENT = "*"
    REPORT = "1"


@dataclasses.dataclass(frozen=True)
class ActionPair:
    buy: int
    report: Report

    def __post_init__(self) -> None:
        if self.buy not in (0, 1) or isinstance(self.buy, bool):
            raise ValueError(f"buy must be 0 or 1, not {self.buy!r}")
        if not isinstance(self.report, Report):
            raise ValueError(f"report must be a Report, not {self.report!r}")

    @property
    def index(self) -> int:
        # buy before report, SILENT before REPORT
        return 2 * self.buy + (self.report is Report.REPORT)

    @property
    def reports(self) -> bool:
        return self.report is Report.REPORT

    def short(self) -> str:
        return f"({self.buy},{self.report.value})"

    def __str__(self) -> str:
        return f"(buy={self.buy},report={self.report.value})"


ACTION_PAIRS = tuple(
    ActionPair(buy, report) for buy in (0, 1) for report in (Report.SILENT, Report.REPORT)
)
assert [pair.index for pair in ACTION_PAIRS] == [0, 1, 2, 3]


def _is_real(value: object) -> bool:
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def _is_int(value: object) -> bool:
    return isinstance(value, numbers.Integral) and not isinstance(value, bool)


# (field, check, constraint). The constraint text is shown to users as-is.
PARAM_RULES: list[tuple[str, Callable[[Any], bool], str]] = [
    ("epsilon", lambda x: _is_real(x) and 0 < x < 1, "must lie in (0, 1)"),
    ("p", lambda x: _is_real(x) and 0 < x < 0.5, "must lie in (0, 1/2)"),
    ("c", lambda x: _is_real(x) and x >= 0, "must be nonnegative"),
    ("grid_size", lambda x: _is_int(x) and x >= 3, "must be an integer >= 3"),
    ("vi_tol", lambda x: _is_real(x) and x > 0, "must be positive"),
    ("max_iters", lambda x: _is_int(x) and x >= 1, "must be a positive integer"),
    ("horizon", lambda x: _is_int(x) and x >= 1, "must be a positive integer"),
    (
        "num_replications",
        lambda x: _is_int(x) and x >= 1,
        "must be a positive integer",
    ),
    ("seed", lambda x: _is_int(x) and x >= 0, "must be a nonnegative integer"),
    ("initial_belief", lambda x: _is_real(x) and 0 <= x <= 1, "must lie in [0, 1]"),
    ("burn_in", lambda x: _is_int(x) and x >= 0, "must be a nonnegative integer"),
]


@dataclasses.dataclass(frozen=True)
class Params:
    epsilon: float = 0.001
    p: float = 0.2
    c: float = 0.05
    grid_size: int = 1001
    vi_tol: float = 1e-9
    max_iters: int = 10 ** 6
    horizon: int = 10 ** 6
    num_replications: int = 20
    seed: int = 0
    # P(X_1 = 1), also the first public belief
    initial_belief: float = 0.5
    burn_in: int = 10 ** 4

    def __post_init__(self) -> None:
        problems = [
            f"{name} {constraint} (got {getattr(self, name)!r})"
            for name, check, constraint in PARAM_RULES
            if not check(getattr(self, name))
        ]
        if problems:
            raise ValueError("; ".join(problems))


def state_kernel(params: Params, from_state: int, to_state: int) -> float:
    if State(from_state) != State(to_state):
        return params.epsilon
    return 1 - params.epsilon


def obs_kernel(params: Params, state: int, obs: int) -> float:
    if Observation(obs) != State(state):
        return params.p
    return 1 - params.p


def initial_distribution(params: Params) -> tuple[float, float]:
    return (1 - params.initial_belief, params.initial_belief)


def reward(params: Params, state: int, action: ActionPair) -> float:
    result = -params.c if action.reports else 0.0
    if action.buy:
        result += 0.5 if State(state) == State.GOOD else -0.5
    return result


class Kind(enum.Enum):
    LEARNING = "learning"
    NON_LEARNING = "non-learning"


@dataclasses.dataclass(frozen=True)
class GammaFn:
    """What a buyer does for each private observation, decided before seeing it."""

    on_v0: ActionPair
    on_v1: ActionPair

    def __call__(self, obs: int) -> ActionPair:
        return self.on_v1 if Observation(obs) == Observation.HIGH else self.on_v0

    @property
    def kind(self) -> Kind:
        if self.on_v0 == self.on_v1:
            return Kind.NON_LEARNING
        return Kind.LEARNING

    @property
    def learning(self) -> bool:
        return self.kind is Kind.LEARNING

    @property
    def reports(self) -> bool:
        return self.on_v0.reports or self.on_v1.reports

    @property
    def dominated(self) -> bool:
        # Reporting is wasted if it happens for both signals (the report then
        # says nothing) or if the purchase already reveals the signal.
        if self.on_v0.reports and self.on_v1.reports:
            return True
        return self.reports and self.on_v0.buy != self.on_v1.buy

    @property
    def id(self) -> int:
        return 4 * self.on_v0.index + self.on_v1.index

    def short(self) -> str:
        return f"[{self.on_v0.short()};{self.on_v1.short()}]"

    def __str__(self) -> str:
        return f"v0→{self.on_v0}, v1→{self.on_v1}"


# canonical order: lexicographic in (on_v0, on_v1), so that ALL_GAMMAS[g.id] == g
ALL_GAMMAS = tuple(GammaFn(a, b) for a, b in itertools.product(ACTION_PAIRS, repeat=2))
assert [gamma.id for gamma in ALL_GAMMAS] == list(range(16))

NEVER_BUY = GammaFn(ACTION_PAIRS[0], ACTION_PAIRS[0])
ALWAYS_BUY = GammaFn(ACTION_PAIRS[2], ACTION_PAIRS[2])
FOLLOW_OBSERVATION = GammaFn(ACTION_PAIRS[0], ACTION_PAIRS[2])


def enumerate_gammas() -> list[GammaFn]:
    return list(ALL_GAMMAS)


def nondominated_gammas() -> list[GammaFn]:
    return [gamma for gamma in ALL_GAMMAS if not gamma.dominated]


def gamma_id(gamma: GammaFn) -> int:
    return gamma.id


def gamma_from_id(number: int) -> GammaFn:
    return ALL_GAMMAS[number]


def apply_gamma(gamma: GammaFn, obs: int) -> ActionPair:
    return gamma(obs)


def pretty(gamma: GammaFn) -> str:
    return str(gamma)


def same_partition(first: GammaFn, second: GammaFn) -> bool:
    return first.kind == second.kind


def canonical_order(gammas: list[GammaFn]) -> list[GammaFn]:
    result = sorted(set(gammas), key=(lambda gamma: gamma.id))
    if not result:
        raise ValueError("the set of gamma functions must not be empty")
    return result
