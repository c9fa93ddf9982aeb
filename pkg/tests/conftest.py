import pytest

from herdbreak import solver, strategic
from herdbreak.config import default_config
from herdbreak.model import Params


@pytest.fixture(scope="session")
def default_params():
    return Params(epsilon=0.001, p=0.2, c=0.05, grid_size=1001, vi_tol=1e-9)


@pytest.fixture(scope="session")
def team_solution(default_params):
    return solver.solve_average_reward(default_params)


@pytest.fixture(scope="session")
def value_table(team_solution):
    return team_solution[0]


@pytest.fixture(scope="session")
def team_policy(team_solution):
    return team_solution[1]


@pytest.fixture(scope="session")
def strategic_policy(default_params):
    return strategic.strategic_policy(default_params)


@pytest.fixture(scope="session")
def coincidence(team_policy, strategic_policy):
    return strategic.coincidence_set(team_policy, strategic_policy)


@pytest.fixture(scope="session")
def scheme(default_params, coincidence):
    return strategic.build_incentives(default_params, coincidence)


@pytest.fixture(scope="session")
def incentivized_policy(default_params, scheme):
    return strategic.incentivized_policy(default_params, scheme)


@pytest.fixture
def small_config(tmp_path):
    config = default_config()
    config.update(
        grid_size=101,
        vi_tol=1e-8,
        horizon=2000,
        burn_in=100,
        num_replications=2,
        occupancy_bins=10,
        out_dir=str(tmp_path / "out"),
    )
    return config
