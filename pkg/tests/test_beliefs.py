import itertools

import numpy as np
import pytest

from herdbreak import beliefs
from herdbreak.model import (
    ACTION_PAIRS,
    ALL_GAMMAS,
    ALWAYS_BUY,
    FOLLOW_OBSERVATION,
    NEVER_BUY,
    Params,
    gamma_from_id,
    nondominated_gammas,
    obs_kernel,
    reward,
    state_kernel,
)


def brute_force(params, belief, gamma, outcome):
    """Enumerate (x_t, v_t, x_t+1) and return (next belief or None, expected reward)."""
    total = 0.0
    good_next = 0.0
    expected = 0.0
    for x, v in itertools.product((0, 1), repeat=2):
        weight = (belief if x else 1 - belief) * obs_kernel(params, x, v)
        expected += weight * reward(params, x, gamma(v))
        if gamma(v) != outcome:
            continue
        for x_next in (0, 1):
            joint = weight * state_kernel(params, x, x_next)
            total += joint
            good_next += joint * x_next
    return (good_next / total if total > 0 else None, expected)


def test_matches_brute_force():
    rng = np.random.default_rng(1234)
    param_sets = [
        Params(epsilon=0.001, p=0.2, c=0.05),
        Params(epsilon=0.3, p=0.45, c=0.0),
        Params(epsilon=0.05, p=0.01, c=0.7),
    ]
    checked = 0
    for i in range(10_000):
        params = param_sets[i % len(param_sets)]
        belief = float(rng.random())
        gamma = ALL_GAMMAS[int(rng.integers(16))]
        outcome = ACTION_PAIRS[int(rng.integers(4))]
        expected_next, expected_reward = brute_force(params, belief, gamma, outcome)

        assert beliefs.expected_reward(params, belief, gamma) == pytest.approx(
            expected_reward, abs=1e-12
        )
        if expected_next is None:
            with pytest.raises(beliefs.ZeroProbabilityOutcome):
                beliefs.belief_update(params, belief, gamma, outcome)
        else:
            actual = beliefs.belief_update(params, belief, gamma, outcome)
            assert actual == pytest.approx(expected_next, abs=1e-12)
            checked += 1
    assert checked > 2000


def test_zero_probability_outcome():
    params = Params()
    with pytest.raises(beliefs.ZeroProbabilityOutcome) as error:
        beliefs.belief_update(params, 0.5, NEVER_BUY, ACTION_PAIRS[2])
    assert error.value.gamma == NEVER_BUY
    assert "(buy=1,report=*)" in str(error.value)


def test_non_learning_update_is_prediction():
    params = Params(epsilon=0.01)
    for belief in [0, 0.1, 0.5, 0.93, 1]:
        assert beliefs.belief_update(
            params, belief, ALWAYS_BUY, ACTION_PAIRS[2]
        ) == pytest.approx(beliefs.prediction(params, belief), abs=1e-15)
    assert beliefs.prediction(params, 0) == pytest.approx(0.01)
    assert beliefs.prediction(params, 0.5) == pytest.approx(0.5)


def test_bad_belief():
    with pytest.raises(ValueError):
        beliefs.belief_update(Params(), 1.5, NEVER_BUY, ACTION_PAIRS[0])
    with pytest.raises(ValueError):
        beliefs.prediction(Params(), -0.1)


def test_successor_distribution():
    params = Params(epsilon=0.01, p=0.2)
    branches = beliefs.successor_distribution(params, 0.3, FOLLOW_OBSERVATION)
    assert [branch.outcome for branch in branches] == [ACTION_PAIRS[0], ACTION_PAIRS[2]]
    assert sum(branch.prob for branch in branches) == pytest.approx(1)
    # the martingale property holds before the state moves
    mean = sum(branch.prob * branch.next for branch in branches)
    assert mean == pytest.approx(beliefs.prediction(params, 0.3))

    [only] = beliefs.successor_distribution(params, 0.3, NEVER_BUY)
    assert only.prob == pytest.approx(1)
    assert only.next == pytest.approx(beliefs.prediction(params, 0.3))


def test_tables_agree_with_scalar_functions():
    params = Params(epsilon=0.02, p=0.3, c=0.1)
    points = np.linspace(0, 1, 23)
    gammas = nondominated_gammas()
    rewards = beliefs.expected_rewards(params, points, gammas)
    probs, nexts = beliefs.successor_tables(params, points, gammas)
    for i, belief in enumerate(points):
        for j, gamma in enumerate(gammas):
            assert rewards[i, j] == pytest.approx(
                beliefs.expected_reward(params, belief, gamma), abs=1e-12
            )
            branches = beliefs.successor_distribution(params, belief, gamma)
            assert len(branches) == (2 if gamma.learning else 1)
            for k, branch in enumerate(branches):
                if gamma.learning:
                    k = [gamma(0), gamma(1)].index(branch.outcome)
                assert probs[i, j, k] == pytest.approx(branch.prob, abs=1e-12)
                assert nexts[i, j, k] == pytest.approx(branch.next, abs=1e-12)
            assert probs[i, j].sum() == pytest.approx(1, abs=1e-12)


def test_update_beliefs_vectorized():
    params = Params(epsilon=0.02, p=0.3)
    rng = np.random.default_rng(5)
    points = rng.random(200)
    ids = rng.integers(16, size=200)
    observations = rng.integers(2, size=200)
    outcomes = beliefs.PAIR_IDS[ids, observations]
    updated = beliefs.update_beliefs(params, points, ids, outcomes)
    # the same numbers with the likelihood table built once up front
    likelihoods = beliefs.outcome_likelihoods(params)
    assert np.array_equal(
        beliefs.update_beliefs(params, points, ids, outcomes, likelihoods), updated
    )
    for belief, gamma_id, outcome_id, new in zip(points, ids, outcomes, updated):
        assert new == pytest.approx(
            beliefs.belief_update(
                params, belief, ALL_GAMMAS[gamma_id], ACTION_PAIRS[outcome_id]
            ),
            abs=1e-12,
        )

    with pytest.raises(beliefs.ZeroProbabilityOutcome):
        beliefs.update_beliefs(params, np.array([0.5]), np.array([0]), np.array([3]))


def test_report_probabilities():
    params = Params(p=0.2)
    probabilities = beliefs.report_probabilities(params, np.array([0, 1]), [ALL_GAMMAS[1]])
    # gamma 1 reports when the signal is high
    assert probabilities[:, 0] == pytest.approx([0.2, 0.8])


def test_private_belief():
    params = Params(p=0.2)
    assert beliefs.private_belief(params, 0.5, 1) == pytest.approx(0.8)
    assert beliefs.private_belief(params, 0.5, 0) == pytest.approx(0.2)
    # at belief p, a high signal leaves the buyer indifferent
    assert beliefs.private_belief(params, 0.2, 1) == pytest.approx(0.5)


def test_replay_beliefs():
    params = Params(epsilon=0.01, p=0.25)
    gammas = [FOLLOW_OBSERVATION, NEVER_BUY, FOLLOW_OBSERVATION]
    outcomes = [ACTION_PAIRS[2], ACTION_PAIRS[0], ACTION_PAIRS[0]]
    path = beliefs.replay_beliefs(params, 0.5, gammas, outcomes)
    assert len(path) == 4
    assert path[0] == 0.5
    assert path[1] > 0.5
    assert path[2] == pytest.approx(beliefs.prediction(params, path[1]))
    assert path[3] < path[2]


def test_worked_examples():
    params = Params(epsilon=0.001, p=0.2, c=0.05)
    up = ACTION_PAIRS[2]
    assert beliefs.outcome_likelihood(params, 0.5, FOLLOW_OBSERVATION, up) == pytest.approx(
        0.5, abs=1e-15
    )
    assert beliefs.outcome_likelihood(params, 0.6, FOLLOW_OBSERVATION, up) == pytest.approx(
        0.56, abs=1e-15
    )
    assert beliefs.outcome_likelihood(params, 0.37, ALWAYS_BUY, up) == pytest.approx(
        1, abs=1e-15
    )

    assert beliefs.belief_update(params, 0.5, NEVER_BUY, ACTION_PAIRS[0]) == pytest.approx(
        0.5, abs=1e-15
    )
    # posterior 0.8, then 0.8*0.999 + 0.2*0.001
    assert beliefs.belief_update(params, 0.5, FOLLOW_OBSERVATION, up) == pytest.approx(
        0.7994, abs=1e-12
    )
    assert beliefs.belief_update(params, 1.0, FOLLOW_OBSERVATION, up) == pytest.approx(
        0.999, abs=1e-15
    )

    branches = beliefs.successor_distribution(params, 0.6, FOLLOW_OBSERVATION)
    assert {branch.outcome: branch.prob for branch in branches} == pytest.approx(
        {ACTION_PAIRS[0]: 0.44, up: 0.56}, abs=1e-15
    )
    for belief in (0.0, 1.0):
        probs = [
            branch.prob
            for branch in beliefs.successor_distribution(params, belief, FOLLOW_OBSERVATION)
        ]
        assert sorted(probs) == pytest.approx([0.2, 0.8], abs=1e-15)

    assert beliefs.expected_reward(params, 0.6, NEVER_BUY) == 0
    assert beliefs.expected_reward(params, 0.6, FOLLOW_OBSERVATION) == pytest.approx(
        0.2, abs=1e-15
    )
    # reporting only after a high signal costs c times P(high signal)
    report_when_buying = gamma_from_id(4 * 0 + 3)
    assert beliefs.expected_reward(params, 0.6, report_when_buying) == pytest.approx(
        0.2 - 0.05 * 0.56, abs=1e-15
    )


def test_update_depends_only_on_belief():
    params = Params(epsilon=0.01, p=0.2)
    # two histories with different gammas and outcomes that carry the same information
    silent = beliefs.replay_beliefs(
        params, 0.4, [FOLLOW_OBSERVATION, NEVER_BUY], [ACTION_PAIRS[2], ACTION_PAIRS[0]]
    )
    noisy = beliefs.replay_beliefs(
        params,
        0.4,
        [gamma_from_id(4 * 1 + 3), gamma_from_id(4 * 1 + 1)],
        [ACTION_PAIRS[3], ACTION_PAIRS[1]],
    )
    assert silent[1:] == noisy[1:]
    here = silent[-1]
    for gamma in ALL_GAMMAS:
        for outcome in {gamma.on_v0, gamma.on_v1}:
            expected = beliefs.belief_update(params, here, gamma, outcome)
            assert beliefs.belief_update(params, noisy[-1], gamma, outcome) == expected

    # same belief, different pasts, in one vectorized call
    ids = np.array([FOLLOW_OBSERVATION.id] * 2)
    updated = beliefs.update_beliefs(
        params, np.array([silent[-1], noisy[-1]]), ids, np.array([2, 2])
    )
    assert updated[0] == updated[1]


def test_follow_observation_update_is_increasing():
    for params in [Params(epsilon=0.001, p=0.2), Params(epsilon=0.3, p=0.45)]:
        points = np.linspace(0, 1, 1001)
        updated = [
            beliefs.belief_update(params, belief, FOLLOW_OBSERVATION, ACTION_PAIRS[2])
            for belief in points
        ]
        assert np.all(np.diff(updated) > 0)


def test_branches_of_every_gamma():
    params = Params(epsilon=0.001, p=0.2)
    points = np.linspace(0, 1, 101)
    probs, nexts = beliefs.successor_tables(params, points, ALL_GAMMAS)
    assert np.all(np.abs(probs.sum(axis=2) - 1) <= 1e-12)

    # undo the prediction step to get the Bayes posterior of each branch
    posterior = (nexts - params.epsilon) / (1 - 2 * params.epsilon)
    averaged = (probs * posterior).sum(axis=2)
    assert np.all(np.abs(averaged - points[:, None]) <= 1e-12)

    for belief in points:
        for gamma in ALL_GAMMAS:
            branches = beliefs.successor_distribution(params, belief, gamma)
            assert sum(branch.prob for branch in branches) == pytest.approx(1, abs=1e-12)
