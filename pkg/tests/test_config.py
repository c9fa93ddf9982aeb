import json

import pytest

from herdbreak.config import (
    Violation,
    default_config,
    load_from_file,
    params_from_config,
    save_to_file,
    validate_config,
)


def test_old_config_format(tmp_path):
    (tmp_path / "config.json").write_text(
        """
        {
          "epsilon": 0.01,
          "p": 0.1,
          "c": 0.2,
          "grid_size": 201,
          "vi_tol": 1e-9,
          "horizon": 1000,
          "num_replications": 5,
          "seed": 3,
          "pay_on_difference_set": false,
          "out_dir": "results"
        }
        """
    )
    assert load_from_file(tmp_path / "config.json") == {
        "epsilon": 0.01,
        "p": 0.1,
        "c": 0.2,
        "initial_belief": 0.5,  # added
        "grid_size": 201,
        "vi_tol": 1e-9,
        "max_iters": 10 ** 6,  # added
        "include_dominated": False,  # added
        "horizon": 1000,
        "num_replications": 5,
        "seed": 3,
        "burn_in": 10 ** 4,  # added
        "snap_to_grid": False,  # added
        "occupancy_bins": 50,  # added
        "pay_on_difference_set": False,
        "extra_bonus_delta": 0.0,  # added
        "out_dir": "results",
    }


def test_missing_file(tmp_path):
    assert load_from_file(tmp_path / "nope.json") is None


def test_save(tmp_path):
    config = default_config()
    config["seed"] = 123
    path = tmp_path / "a" / "b" / "config.json"
    save_to_file(path, config)
    assert path.read_text().endswith("}\n")
    assert json.loads(path.read_text())["seed"] == 123
    assert load_from_file(path) == config


def test_defaults_are_valid():
    assert validate_config(default_config()) == []
    params = params_from_config(default_config())
    assert (params.p, params.epsilon, params.c) == (0.2, 0.001, 0.05)


@pytest.mark.parametrize(
    "key, value, message",
    [
        ("p", 0.6, "p must lie in (0, 1/2) (got 0.6)"),
        ("epsilon", 0, "epsilon must lie in (0, 1) (got 0)"),
        ("extra_bonus_delta", -0.5, "extra_bonus_delta must be nonnegative (got -0.5)"),
        ("grid_size", 2.5, "grid_size must be an integer >= 3 (got 2.5)"),
        ("snap_to_grid", "yes", "snap_to_grid must be true or false (got 'yes')"),
        ("seed", None, "seed must be a nonnegative integer (got None)"),
    ],
)
def test_violations(key, value, message):
    config = default_config()
    config[key] = value
    [violation] = validate_config(config)
    assert violation.field == key
    assert violation.value == value
    assert str(violation) == message


def test_unknown_and_missing_keys():
    config = default_config()
    del config["horizon"]
    config["colour"] = "blue"
    assert validate_config(config) == [
        Violation("horizon", None, "is missing"),
        Violation("colour", "blue", "is not a known setting"),
    ]
