from __future__ import annotations
import dataclasses
import json
import sys
from pathlib import Path
from typing import Any, Callable, TYPE_CHECKING

import appdirs

from herdbreak.model import PARAM_RULES, Params

if sys.version_info >= (3, 8):
    from typing import TypedDict
else:
    if TYPE_CHECKING:
        from typing_extensions import TypedDict
    else:
        TypedDict = object


class RunConfig(TypedDict):
    # model
    epsilon: float
    p: float
    c: float
    initial_belief: float
    # solver
    grid_size: int
    vi_tol: float
    max_iters: int
    include_dominated: bool
    # simulation
    horizon: int
    num_replications: int
    seed: int
    burn_in: int
    snap_to_grid: bool
    occupancy_bins: int
    # mechanism
    pay_on_difference_set: bool  # False pays inside the coincidence set instead
    extra_bonus_delta: float
    out_dir: str


def default_config() -> RunConfig:
    return {
        "epsilon": 0.001,
        "p": 0.2,
        "c": 0.05,
        "initial_belief": 0.5,
        "grid_size": 1001,
        "vi_tol": 1e-9,
        "max_iters": 10 ** 6,
        "include_dominated": False,
        "horizon": 10 ** 6,
        "num_replications": 20,
        "seed": 0,
        "burn_in": 10 ** 4,
        "snap_to_grid": False,
        "occupancy_bins": 50,
        "pay_on_difference_set": True,
        "extra_bonus_delta": 0.0,
        "out_dir": "herdbreak-output",
    }


def default_config_path() -> Path:
    return Path(appdirs.user_config_dir("herdbreak", appauthor=False)) / "config.json"


def load_from_file(path: Path) -> RunConfig | None:
    try:
        with path.open("r", encoding="utf-8") as file:
            result = json.load(file)
    except FileNotFoundError:
        return None

    # Older config files lack some keys
    for key, value in default_config().items():
        result.setdefault(key, value)
    return result  # type: ignore[no-any-return]


def save_to_file(path: Path, config: RunConfig) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as file:
        json.dump(config, file, indent=2)
        file.write("\n")


@dataclasses.dataclass(frozen=True)
class Violation:
    field: str
    value: object
    constraint: str

    def __str__(self) -> str:
        return f"{self.field} {self.constraint} (got {self.value!r})"


def _is_bool(value: object) -> bool:
    return isinstance(value, bool)


_EXTRA_RULES: list[tuple[str, Callable[[Any], bool], str]] = [
    (
        "extra_bonus_delta",
        lambda x: isinstance(x, (int, float)) and not _is_bool(x) and x >= 0,
        "must be nonnegative",
    ),
    ("include_dominated", _is_bool, "must be true or false"),
    ("snap_to_grid", _is_bool, "must be true or false"),
    ("pay_on_difference_set", _is_bool, "must be true or false"),
    (
        "occupancy_bins",
        lambda x: isinstance(x, int) and not _is_bool(x) and x >= 2,
        "must be an integer >= 2",
    ),
    ("out_dir", lambda x: isinstance(x, str) and x != "", "must be a nonempty path"),
]


def validate_config(config: RunConfig) -> list[Violation]:
    """Everything wrong with the config, in field order. Never raises."""
    result = []
    known = default_config().keys()
    for name, check, constraint in PARAM_RULES + _EXTRA_RULES:
        if name not in config:
            result.append(Violation(name, None, "is missing"))
            continue
        value = config[name]  # type: ignore[literal-required]
        try:
            ok = check(value)
        except TypeError:
            ok = False
        if not ok:
            result.append(Violation(name, value, constraint))
    for name in config:
        if name not in known:
            result.append(Violation(name, config[name], "is not a known setting"))  # type: ignore[literal-required]
    return result


def params_from_config(config: RunConfig) -> Params:
    return Params(
        **{field.name: config[field.name] for field in dataclasses.fields(Params)}  # type: ignore[literal-required]
    )
