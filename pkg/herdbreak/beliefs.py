"""Public belief bookkeeping.

A belief is a float, the probability that the product is good given everything
that previous buyers did in public. Each buyer moves the belief in two steps:
Bayes' rule on the public outcome (a, b), then one step of the state chain.
Neither step looks at how the gamma functions were chosen, so the update only
needs (belief, gamma, outcome).

The scalar functions are the readable API. The table functions do the same
computation for many beliefs and gammas at once, and the solver and the
simulator use those.
"""
from __future__ import annotations
import dataclasses
from typing import Sequence

import numpy as np
import numpy.typing as npt

from herdbreak.model import ACTION_PAIRS, ALL_GAMMAS, ActionPair, GammaFn, Params

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]
BoolArray = npt.NDArray[np.bool_]
Int8Array = npt.NDArray[np.int8]
# P(X_t = 1 | public history); P(X_t = 0) is never stored
Belief = float

# PAIR_IDS[g, v] is the ActionPair index that gamma number g produces from v
PAIR_IDS = np.array([[g.on_v0.index, g.on_v1.index] for g in ALL_GAMMAS], dtype=np.int64)
LEARNING = np.array([g.learning for g in ALL_GAMMAS])
REPORTING = np.array([g.reports for g in ALL_GAMMAS])
PAIR_BUYS = np.array([0.0, 0.0, 1.0, 1.0])
PAIR_REPORTS = np.array([0.0, 1.0, 0.0, 1.0])
for _array in (PAIR_IDS, LEARNING, REPORTING, PAIR_BUYS, PAIR_REPORTS):
    _array.setflags(write=False)


class ZeroProbabilityOutcome(ValueError):
    def __init__(self, belief: Belief, gamma: GammaFn, outcome: ActionPair):
        super().__init__(
            f"outcome {outcome} cannot happen when buyers play {gamma} at belief {belief!r}"
        )
        self.belief = belief
        self.gamma = gamma
        self.outcome = outcome


@dataclasses.dataclass(frozen=True)
class OutcomeBranch:
    outcome: ActionPair
    prob: float
    next: Belief


def _check_belief(belief: Belief) -> Belief:
    if not 0 <= belief <= 1:
        raise ValueError(f"belief must lie in [0, 1], not {belief!r}")
    return float(belief)


def channel(params: Params) -> FloatArray:
    """channel(params)[x, v] = Q_v(v | x)"""
    return np.array([[1 - params.p, params.p], [params.p, 1 - params.p]])


def gamma_ids(gammas: Sequence[GammaFn]) -> IntArray:
    return np.array([gamma.id for gamma in gammas], dtype=np.int64)


def reward_coefficients(
    params: Params, gammas: Sequence[GammaFn]
) -> tuple[FloatArray, FloatArray]:
    """Return (r0, r1) such that the expected reward is (1 - belief)*r0 + belief*r1.

    r_x is the expected reward when the state is known to be x, averaged over
    the signal only.
    """
    ids = gamma_ids(gammas)
    q = channel(params)
    pairs = PAIR_IDS[ids]  # (G, 2)
    buys = PAIR_BUYS[pairs]
    reports = PAIR_REPORTS[pairs]
    coefficients = []
    for x, value_of_buying in [(0, -0.5), (1, 0.5)]:
        per_signal = -params.c * reports + value_of_buying * buys
        coefficients.append(per_signal @ q[x])
    return (coefficients[0], coefficients[1])


def outcome_likelihoods(params: Params) -> FloatArray:
    """outcome_likelihoods(params)[g, o, x] = P(outcome o | state x) under gamma number g."""
    q = channel(params)
    # matches[g, o, v] is 1 when gamma g maps signal v to outcome o
    matches = PAIR_IDS[:, None, :] == np.arange(len(ACTION_PAIRS))[None, :, None]
    return matches.astype(np.float64) @ q.T


class GammaTables:
    """The parts of the table functions that do not depend on the belief.

    Build one per (params, gamma list) and reuse it for every belief array.
    """

    def __init__(self, params: Params, gammas: Sequence[GammaFn]):
        self.params = params
        self.gammas = list(gammas)
        self.ids = gamma_ids(self.gammas)
        self.r0, self.r1 = reward_coefficients(params, self.gammas)
        q = channel(params)
        reports = PAIR_REPORTS[PAIR_IDS[self.ids]]
        self.report0 = reports @ q[0]
        self.report1 = reports @ q[1]
        self.merged = ~LEARNING[self.ids]
        # likelihood[g, k, x] = P(outcome gamma(k) | x)
        self.likelihood = np.empty((len(self.ids), 2, 2))
        for k in (0, 1):
            for x in (0, 1):
                self.likelihood[:, k, x] = q[x, k] + self.merged * q[x, 1 - k]

    def rewards(self, beliefs: FloatArray) -> FloatArray:
        column = np.asarray(beliefs, dtype=np.float64)[:, None]
        return (1 - column) * self.r0 + column * self.r1

    def report_probabilities(self, beliefs: FloatArray) -> FloatArray:
        column = np.asarray(beliefs, dtype=np.float64)[:, None]
        return (1 - column) * self.report0 + column * self.report1

    def successors(self, beliefs: FloatArray) -> tuple[FloatArray, FloatArray]:
        """Branch probabilities and next beliefs, both shaped (beliefs, gammas, 2).

        Branch k is the outcome gamma(v=k). A non-learning gamma has one outcome,
        so its branch 1 gets probability 0 and copies the next belief of branch 0.
        """
        column = np.asarray(beliefs, dtype=np.float64)[:, None, None]
        good = column * self.likelihood[None, :, :, 1]
        probs = (1 - column) * self.likelihood[None, :, :, 0] + good
        nexts = _predict(self.params, good / probs)
        probs[:, self.merged, 1] = 0.0
        nexts[:, self.merged, 1] = nexts[:, self.merged, 0]
        return (probs, nexts)


def expected_rewards(
    params: Params, beliefs: FloatArray, gammas: Sequence[GammaFn]
) -> FloatArray:
    return GammaTables(params, gammas).rewards(beliefs)


def report_probabilities(
    params: Params, beliefs: FloatArray, gammas: Sequence[GammaFn]
) -> FloatArray:
    return GammaTables(params, gammas).report_probabilities(beliefs)


def _predict(params: Params, posterior_good: FloatArray) -> FloatArray:
    return (1 - posterior_good) * params.epsilon + posterior_good * (1 - params.epsilon)


def successor_tables(
    params: Params, beliefs: FloatArray, gammas: Sequence[GammaFn]
) -> tuple[FloatArray, FloatArray]:
    return GammaTables(params, gammas).successors(beliefs)


def update_beliefs(
    params: Params,
    beliefs: FloatArray,
    gamma_id_array: IntArray,
    outcome_ids: IntArray,
    likelihoods: FloatArray | None = None,
) -> FloatArray:
    """Vectorized belief_update, one (gamma, outcome) per belief.

    Pass outcome_likelihoods(params) as likelihoods when calling this in a loop.
    """
    if likelihoods is None:
        likelihoods = outcome_likelihoods(params)
    per_state = likelihoods[gamma_id_array, outcome_ids]  # (n, 2)
    good = beliefs * per_state[:, 1]
    total = (1 - beliefs) * per_state[:, 0] + good
    if not np.all(total > 0):
        i = int(np.argmin(total > 0))
        raise ZeroProbabilityOutcome(
            float(beliefs[i]),
            ALL_GAMMAS[int(gamma_id_array[i])],
            ACTION_PAIRS[int(outcome_ids[i])],
        )
    return _predict(params, good / total)


def outcome_likelihood(
    params: Params, belief: Belief, gamma: GammaFn, outcome: ActionPair
) -> float:
    belief = _check_belief(belief)
    q = channel(params)
    total = 0.0
    for x, prior in [(0, 1 - belief), (1, belief)]:
        for v in (0, 1):
            if gamma(v) == outcome:
                total += prior * q[x, v]
    return total


def belief_update(
    params: Params, belief: Belief, gamma: GammaFn, outcome: ActionPair
) -> Belief:
    belief = _check_belief(belief)
    q = channel(params)
    likelihood = [sum(q[x, v] for v in (0, 1) if gamma(v) == outcome) for x in (0, 1)]
    good = belief * likelihood[1]
    total = (1 - belief) * likelihood[0] + good
    if total <= 0:
        raise ZeroProbabilityOutcome(belief, gamma, outcome)
    posterior_good = good / total
    return float(
        (1 - posterior_good) * params.epsilon + posterior_good * (1 - params.epsilon)
    )


def successor_distribution(
    params: Params, belief: Belief, gamma: GammaFn
) -> list[OutcomeBranch]:
    outcomes = [gamma.on_v0] if gamma.on_v0 == gamma.on_v1 else [gamma.on_v0, gamma.on_v1]
    result = []
    for outcome in outcomes:
        prob = outcome_likelihood(params, belief, gamma, outcome)
        if prob > 0:
            result.append(
                OutcomeBranch(outcome, prob, belief_update(params, belief, gamma, outcome))
            )
    return result


def expected_reward(params: Params, belief: Belief, gamma: GammaFn) -> float:
    belief = _check_belief(belief)
    return float(expected_rewards(params, np.array([belief]), [gamma])[0, 0])


def prediction(params: Params, belief: Belief) -> Belief:
    """Where the belief goes when nothing is learned."""
    belief = _check_belief(belief)
    return float(_predict(params, np.array(belief)))


def private_belief(params: Params, belief: Belief, obs: int) -> float:
    """A buyer's own P(X_t = 1) after combining the public belief with its signal."""
    belief = _check_belief(belief)
    q = channel(params)
    good = belief * q[1, obs]
    return float(good / ((1 - belief) * q[0, obs] + good))


def replay_beliefs(
    params: Params,
    initial_belief: Belief,
    gammas: Sequence[GammaFn],
    outcomes: Sequence[ActionPair],
) -> list[Belief]:
    """Recompute the belief path from scratch, one scalar update at a time."""
    assert len(gammas) == len(outcomes)
    result = [_check_belief(initial_belief)]
    for gamma, outcome in zip(gammas, outcomes):
        result.append(belief_update(params, result[-1], gamma, outcome))
    return result
