"""Run configuration: INI-style key-value file plus command-line overrides.

Every key, with its default::

    [run]
    env = mini-highway        # mini-highway | mini-farm | continuous-nav
    seed = 0                  # master seed; every stage derives its own
    output_dir = runs/default
    k =                       # horizon; empty = per-env default (5 / 10 / 5)
    episodes =                # rollouts for failure collection (1000 / 2000 / 300)
    max_cases = 0             # explain at most this many failures (0 = all)
    methods =                 # comma list; empty = every method the env supports

    [train]
    steps =                   # empty = per-env default (200000 / 20000 / 0)
    learning_rate = 0.1
    discount = 0.95
    eps_start = 1.0
    eps_end = 0.05
    eps_decay_steps =         # empty = steps / 2

    [nsga]
    population =              # empty = per-env default (50 / 100 / 50)
    generations =             # empty = per-env default (5 / 10 / 5)
    p_mut =                   # empty = 1/k
    p_cx = 0.9
    tournament = 2
    sigma = 0.1               # fraction of the action range

    [baselines]
    temperature = 1.0
    trials = 20

    [properties]
    samples = 20
    eps =                     # empty = 1e-6 of the action range
    validity = strict         # strict | terminal

    [env]
    # any constructor argument of the chosen environment, e.g. p_lane = 0.1
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..baselines import BASELINES, NEEDS_Q
from ..envs import REGISTRY
from ..nsga2 import METHOD as NSGA_METHOD, NsgaConfig
from ..policy import TrainConfig

ALL_METHODS = BASELINES + (NSGA_METHOD,)

ENV_DEFAULTS = {
    "mini-highway": {"k": 5, "population": 50, "generations": 5, "steps": 200_000, "episodes": 1000},
    "mini-farm": {"k": 10, "population": 100, "generations": 10, "steps": 20_000, "episodes": 2000},
    "continuous-nav": {"k": 5, "population": 50, "generations": 5, "steps": 0, "episodes": 300},
}
CONTINUOUS_ENVS = {"continuous-nav"}

SCHEMA = {
    "run": {"env": str, "seed": int, "output_dir": str, "k": int, "episodes": int,
            "max_cases": int, "methods": str},
    "train": {"steps": int, "learning_rate": float, "discount": float, "eps_start": float,
              "eps_end": float, "eps_decay_steps": int},
    "nsga": {"population": int, "generations": int, "p_mut": float, "p_cx": float,
             "tournament": int, "sigma": float},
    "baselines": {"temperature": float, "trials": int},
    "properties": {"samples": int, "eps": float, "validity": str},
}


class ConfigError(ValueError):
    """Invalid configuration file, override or output location."""


@dataclass
class RunConfig:
    env: str = "mini-highway"
    seed: int = 0
    output_dir: str = "runs/default"
    k: int | None = None
    episodes: int | None = None
    max_cases: int = 0
    methods: tuple = ()
    train: dict = field(default_factory=dict)
    nsga: dict = field(default_factory=dict)
    temperature: float = 1.0
    trials: int = 20
    samples: int = 20
    eps: float | None = None
    validity: str = "strict"
    env_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.env not in REGISTRY:
            raise ConfigError(f"unknown environment {self.env!r}; known: {sorted(REGISTRY)}")
        if self.validity not in ("strict", "terminal"):
            raise ConfigError("properties.validity must be 'strict' or 'terminal'")
        unknown = [m for m in self.methods if m not in ALL_METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; known: {list(ALL_METHODS)}")
        if self.env in CONTINUOUS_ENVS:
            bad = [m for m in self.methods if m in NEEDS_Q]
            if bad:
                raise ConfigError(f"{bad} need Q-values and cannot run on {self.env}")
        for name, value in (("k", self.horizon), ("samples", self.samples), ("trials", self.trials)):
            if value < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.n_episodes < 0 or self.max_cases < 0:
            raise ConfigError("episodes and max_cases must be non-negative")
        try:
            self.train_config()
            self.nsga_config(0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def defaults(self) -> dict:
        return ENV_DEFAULTS[self.env]

    @property
    def horizon(self) -> int:
        return self.k if self.k is not None else self.defaults["k"]

    @property
    def n_episodes(self) -> int:
        return self.episodes if self.episodes is not None else self.defaults["episodes"]

    @property
    def method_list(self) -> tuple:
        if self.methods:
            return tuple(m for m in ALL_METHODS if m in self.methods)
        if self.env in CONTINUOUS_ENVS:
            return tuple(m for m in ALL_METHODS if m not in NEEDS_Q)
        return ALL_METHODS

    @property
    def terminal_only(self) -> bool:
        return self.validity == "terminal"

    def train_config(self, seed: int = 0) -> TrainConfig:
        t = dict(self.train)
        steps = t.pop("steps", None)
        steps = self.defaults["steps"] if steps is None else steps
        decay = t.pop("eps_decay_steps", None)
        decay = steps // 2 if decay is None else decay
        return TrainConfig(steps=steps, eps_decay_steps=decay, seed=seed, **t)

    def nsga_config(self, seed: int) -> NsgaConfig:
        n = dict(self.nsga)
        n.setdefault("population", self.defaults["population"])
        n.setdefault("generations", self.defaults["generations"])
        return NsgaConfig(seed=seed, **n)

    def with_overrides(self, **kwargs) -> "RunConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

    def to_ini(self) -> str:
        """Canonical INI rendering (round-trips through :func:`parse_config`)."""
        def fmt(v):
            return "" if v is None else str(v)

        lines = ["[run]", f"env = {self.env}", f"seed = {self.seed}", f"output_dir = {self.output_dir}",
                 f"k = {fmt(self.k)}", f"episodes = {fmt(self.episodes)}", f"max_cases = {self.max_cases}",
                 f"methods = {', '.join(self.methods)}", "", "[train]"]
        lines += [f"{k} = {v}" for k, v in sorted(self.train.items())]
        lines += ["", "[nsga]"] + [f"{k} = {v}" for k, v in sorted(self.nsga.items())]
        lines += ["", "[baselines]", f"temperature = {self.temperature}", f"trials = {self.trials}",
                  "", "[properties]", f"samples = {self.samples}", f"eps = {fmt(self.eps)}",
                  f"validity = {self.validity}", "", "[env]"]
        lines += [f"{k} = {v}" for k, v in sorted(self.env_params.items())]
        return "\n".join(lines) + "\n"


def _coerce(section: str, key: str, raw: str):
    raw = raw.strip()
    if section == "env":
        if raw == "":
            raise ConfigError(f"env.{key} needs a value")
        for cast in (int, float):
            try:
                return cast(raw)
            except ValueError:
                pass
        return raw
    try:
        cast = SCHEMA[section][key]
    except KeyError:
        raise ConfigError(f"unknown key {section}.{key}") from None
    if raw == "":
        return None
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r} as {cast.__name__}") from None


def parse_config(text: str = "", overrides: list | None = None) -> RunConfig:
    """Build a RunConfig from INI text and ``section.key=value`` overrides."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    values: dict = {}
    for section in parser.sections():
        if section not in SCHEMA and section != "env":
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            values[(section, key)] = _coerce(section, key, raw)
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        lhs, raw = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        if section not in SCHEMA and section != "env":
            raise ConfigError(f"unknown section in override {item!r}")
        values[(section, key)] = _coerce(section, key, raw)

    kwargs: dict = {"train": {}, "nsga": {}, "env_params": {}}
    for (section, key), value in values.items():
        if section == "env":
            kwargs["env_params"][key] = value
        elif value is None:
            continue
        elif section == "run" and key == "methods":
            kwargs["methods"] = tuple(m.strip() for m in value.split(",") if m.strip())
        elif section == "run":
            kwargs[key] = value
        elif section in ("train", "nsga"):
            kwargs[section][key] = value
        else:
            kwargs[key] = value
    return RunConfig(**kwargs)


def load_config(path: str | Path | None, overrides: list | None = None) -> RunConfig:
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, overrides)
