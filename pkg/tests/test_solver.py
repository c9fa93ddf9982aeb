import dataclasses

import numpy as np
import pytest

from herdbreak import beliefs, solver
from herdbreak.model import (
    ALL_GAMMAS,
    FOLLOW_OBSERVATION,
    NEVER_BUY,
    Params,
    nondominated_gammas,
    same_partition,
)


def test_converges(default_params, value_table, team_policy):
    assert value_table.span < default_params.vi_tol
    assert 0 < value_table.iterations < default_params.max_iters
    assert 0 <= value_table.rho <= 0.5
    assert value_table.values[value_table.ref_index] == 0
    assert value_table.grid[value_table.ref_index] == pytest.approx(0.5)
    assert team_policy.regime is solver.Regime.TEAM
    assert team_policy.lookup(0.5) == FOLLOW_OBSERVATION


def test_bellman_residual_on_grid(default_params, value_table, team_policy):
    rng = np.random.default_rng(0)
    for i in rng.choice(len(value_table.grid), size=100, replace=False):
        belief = float(value_table.grid[i])
        residual = solver.bellman_residual(default_params, value_table, team_policy, belief)
        assert residual < 1e-8


def test_rho_stable_across_grids(default_params):
    coarse, junk = solver.solve_average_reward(
        dataclasses.replace(default_params, grid_size=501)
    )
    fine, junk = solver.solve_average_reward(
        dataclasses.replace(default_params, grid_size=2001)
    )
    assert abs(coarse.rho - fine.rho) < 1e-3


def test_dominated_gammas_do_not_help(default_params, value_table):
    with_all, junk = solver.solve_average_reward(default_params, ALL_GAMMAS)
    assert abs(with_all.rho - value_table.rho) < 2 * default_params.vi_tol


def test_dominated_gammas_are_reward_dominated(default_params):
    points = np.linspace(0, 1, 101)
    candidates = nondominated_gammas()
    for gamma in ALL_GAMMAS:
        if not gamma.dominated:
            continue
        [mine] = beliefs.expected_rewards(default_params, points, [gamma]).T
        assert any(
            same_partition(gamma, other)
            and np.all(
                beliefs.expected_rewards(default_params, points, [other])[:, 0]
                >= mine - 1e-15
            )
            for other in candidates
        ), gamma


def test_did_not_converge():
    params = Params(grid_size=51, max_iters=3)
    with pytest.raises(solver.SolverDidNotConverge) as error:
        solver.solve_average_reward(params)
    assert error.value.iterations == 3
    assert error.value.span > params.vi_tol
    assert "did not converge in 3 iterations" in str(error.value)


def test_progress_callback():
    params = Params(epsilon=0.1, grid_size=21, vi_tol=1e-6)
    calls = []
    table, junk = solver.solve_average_reward(
        params, progress=(lambda i, span: calls.append((i, span))), progress_every=5
    )
    assert calls
    assert all(i % 5 == 0 for i, span in calls)
    assert [i for i, span in calls] == list(range(5, table.iterations + 1, 5))


def test_evaluate_policy(default_params, value_table, team_policy, strategic_policy):
    team_gain = solver.evaluate_policy(default_params, team_policy).rho
    assert team_gain == pytest.approx(value_table.rho, abs=1e-7)
    strategic_gain = solver.evaluate_policy(default_params, strategic_policy).rho
    assert strategic_gain <= value_table.rho + 1e-9


def test_never_buying_earns_nothing():
    params = Params(grid_size=11, epsilon=0.1)
    grid = solver.make_grid(11)
    policy = solver.PolicyTable(grid, (NEVER_BUY,) * 11, solver.Regime.STRATEGIC)
    assert solver.evaluate_policy(params, policy).rho == pytest.approx(0, abs=1e-12)


def test_greedy_choice_matches_grid_policy(default_params, value_table, team_policy):
    ids = solver.greedy_choice(
        default_params, value_table, value_table.grid, nondominated_gammas()
    )
    assert list(ids) == list(team_policy.gamma_ids)


def test_interpolation():
    grid = solver.make_grid(5)
    values = np.array([0.0, 1.0, 4.0, 9.0, 16.0])
    assert list(solver.interpolate(grid, values, grid)) == list(values)
    assert solver.interpolate(grid, values, np.array([0.125, 1.0])) == pytest.approx(
        [0.5, 16.0]
    )
    assert solver.reference_index(grid) == 2
    assert list(solver.nearest_index(grid, np.array([0.0, 0.3, 0.99]))) == [0, 1, 4]


def test_choose_best_breaks_ties_by_rank():
    values = np.array([[1.0, 1.0, 0.5], [1.0, 1.0 + 1e-14, 0.0], [0.0, 2.0, 2.0]])
    assert list(solver.choose_best(values, np.array([1, 0, 0]))) == [1, 1, 1]
    assert list(solver.choose_best(values, np.array([0, 0, 0]))) == [0, 0, 1]


def test_learning_intervals():
    grid = solver.make_grid(6)
    choice = (NEVER_BUY, FOLLOW_OBSERVATION, FOLLOW_OBSERVATION, NEVER_BUY, NEVER_BUY)
    policy = solver.PolicyTable(grid, choice + (FOLLOW_OBSERVATION,), solver.Regime.TEAM)
    assert solver.learning_intervals(policy) == [
        (pytest.approx(0.2), pytest.approx(0.4)),
        (1.0, 1.0),
    ]


def test_backup_with_zero_values_is_myopic(default_params):
    grid = solver.make_grid(11)
    zero = solver.ValueTable(grid, np.zeros(11), 0.0, 5)
    value, gamma = solver.bellman_backup(default_params, zero, 0.6, nondominated_gammas())
    assert value == pytest.approx(0.2)
    assert gamma == FOLLOW_OBSERVATION
    assert solver.bellman_backup(default_params, zero, 0.5, [NEVER_BUY]) == (0, NEVER_BUY)


def test_never_buying_only():
    params = Params(grid_size=51, epsilon=0.01)
    table, policy = solver.solve_average_reward(params, [NEVER_BUY])
    assert table.rho == 0
    assert np.all(table.values == 0)
    assert set(policy.choice) == {NEVER_BUY}


def test_expensive_reviews_are_never_written():
    params = Params(grid_size=201, epsilon=0.01, c=10)
    table, policy = solver.solve_average_reward(params)
    assert not any(gamma.reports for gamma in policy.choice)
    quiet = [gamma for gamma in nondominated_gammas() if not gamma.reports]
    quiet_table, junk = solver.solve_average_reward(params, quiet)
    assert table.rho == pytest.approx(quiet_table.rho, abs=2 * params.vi_tol)
    # fewer choices never help
    assert quiet_table.rho <= table.rho + 2 * params.vi_tol


def test_residual_at_reference_point(default_params, value_table, team_policy):
    belief = float(value_table.grid[value_table.ref_index])
    residual = solver.bellman_residual(default_params, value_table, team_policy, belief)
    assert residual <= 2 * default_params.vi_tol
