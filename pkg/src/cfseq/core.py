"""Replayable-environment contract.

Every environment is a set of pure step functions over value states.  All
exogenous randomness arrives through a :class:`StochasticConfig`, a fixed
per-timestep stream of uniform draws, so an episode can be replayed exactly
under a different action sequence: reactive actors still respond to the new
actions, but they consume the same draws at the same timesteps.
"""

from __future__ import annotations

import base64
import hashlib
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Sequence, Union

import numpy as np

Action = Union[int, tuple]


class InputError(ValueError):
    """Malformed state, action or argument."""


class ReplayLengthError(InputError):
    """More actions were replayed than the configuration has draws for."""


class UnsupportedEnvironmentError(InputError):
    """The operation is not defined for this environment's action space."""


def derive_seed(seed: int, label: Any) -> int:
    """Stable 64-bit child seed from a parent seed and a label."""
    digest = hashlib.sha256(f"{int(seed)}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))


# ---------------------------------------------------------------------------
# Action spaces


@dataclass(frozen=True)
class ActionSpace:
    kind: str
    count: int = 0
    lower: tuple = ()
    upper: tuple = ()

    def __post_init__(self):
        if self.kind == "discrete":
            if self.count < 2:
                raise InputError("discrete action space needs at least 2 actions")
        elif self.kind == "continuous":
            if len(self.lower) == 0 or len(self.lower) != len(self.upper):
                raise InputError("continuous bounds must be non-empty and equal length")
            if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
                raise InputError("continuous bounds need lower < upper in every dimension")
        else:
            raise InputError(f"unknown action space kind {self.kind!r}")

    @classmethod
    def discrete(cls, count: int) -> "ActionSpace":
        return cls("discrete", count=int(count))

    @classmethod
    def continuous(cls, lower: Sequence[float], upper: Sequence[float]) -> "ActionSpace":
        return cls("continuous", lower=tuple(float(x) for x in lower), upper=tuple(float(x) for x in upper))

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    @property
    def dim(self) -> int:
        return 1 if self.is_discrete else len(self.lower)

    @property
    def ranges(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    def validate(self, action) -> Action:
        """Return the canonical form of ``action`` or raise :class:`InputError`.

        Discrete actions are plain ints; continuous actions are tuples of floats.
        """
        if self.is_discrete:
            if isinstance(action, (bool, np.bool_)) or not isinstance(action, (int, np.integer)):
                raise InputError(f"expected an integer action, got {action!r}")
            a = int(action)
            if not 0 <= a < self.count:
                raise InputError(f"action {a} outside [0, {self.count})")
            return a
        vec = np.atleast_1d(np.asarray(action, dtype=float))
        if vec.shape != (self.dim,):
            raise InputError(f"expected a {self.dim}-vector action, got {action!r}")
        if not np.all(np.isfinite(vec)):
            raise InputError("action contains non-finite values")
        if np.any(vec < np.asarray(self.lower)) or np.any(vec > np.asarray(self.upper)):
            raise InputError(f"action {action!r} outside bounds")
        return tuple(float(x) for x in vec)

    def validate_sequence(self, actions) -> tuple:
        return tuple(self.validate(a) for a in actions)

    def to_json(self) -> dict:
        if self.is_discrete:
            return {"kind": "discrete", "count": self.count}
        return {"kind": "continuous", "lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_json(cls, data: dict) -> "ActionSpace":
        if data["kind"] == "discrete":
            return cls.discrete(data["count"])
        return cls.continuous(data["lower"], data["upper"])


def action_to_json(action: Action):
    return list(action) if isinstance(action, tuple) else int(action)


def action_from_json(value) -> Action:
    return tuple(float(x) for x in value) if isinstance(value, list) else int(value)


# ---------------------------------------------------------------------------
# Stochastic configurations


@dataclass(frozen=True, eq=False)
class StochasticConfig:
    """Per-timestep exogenous draws; row ``t`` is consumed by step ``t``.

    ``draws`` holds uniforms in [0, 1).  The all-zero row is the calm draw for
    every built-in environment.
    """

    seed: int
    draws: np.ndarray

    def __post_init__(self):
        draws = np.array(self.draws, dtype=np.float64)
        if draws.ndim != 2:
            raise InputError("draws must be a (timesteps, arity) array")
        draws.setflags(write=False)
        object.__setattr__(self, "draws", draws)

    def __len__(self) -> int:
        return self.draws.shape[0]

    def __eq__(self, other):
        if not isinstance(other, StochasticConfig):
            return NotImplemented
        return self.seed == other.seed and np.array_equal(self.draws, other.draws)

    @property
    def arity(self) -> int:
        return self.draws.shape[1]

    def window(self, start: int, stop: int) -> "StochasticConfig":
        if not 0 <= start <= stop <= len(self):
            raise InputError(f"window [{start}, {stop}) outside config of length {len(self)}")
        return StochasticConfig(self.seed, self.draws[start:stop])

    def to_json(self) -> dict:
        raw = np.ascontiguousarray(self.draws, dtype="<f8").tobytes()
        return {
            "seed": int(self.seed),
            "shape": list(self.draws.shape),
            "draws": base64.b64encode(raw).decode("ascii"),
        }

    @classmethod
    def from_json(cls, data: dict) -> "StochasticConfig":
        raw = base64.b64decode(data["draws"])
        draws = np.frombuffer(raw, dtype="<f8").reshape(data["shape"])
        return cls(int(data["seed"]), draws)


def sample_config(seed: int, length: int, arity: int) -> StochasticConfig:
    """Draw ``length`` rows of ``arity`` uniforms from a Philox stream keyed by ``seed``."""
    if length < 1:
        raise InputError("config length must be at least 1")
    if arity < 1:
        raise InputError("draw arity must be at least 1")
    rng = make_rng(seed)
    return StochasticConfig(int(seed), rng.random((int(length), int(arity))))


def zero_config(length: int, arity: int) -> StochasticConfig:
    return StochasticConfig(0, np.zeros((length, arity)))


# ---------------------------------------------------------------------------
# Environment contract


class Environment(ABC):
    """Base class for replayable environments.

    States are immutable values.  ``step`` must be a pure function of
    ``(state, action, draw)`` and must never touch ambient randomness.
    """

    name: str = ""
    schema_version: int = 1
    action_space: ActionSpace
    draw_arity: int = 1
    max_steps: int = 1

    @abstractmethod
    def params(self) -> dict:
        """Constructor keyword arguments that reproduce this environment."""

    @abstractmethod
    def reset(self, seed: int):
        """Initial state for an episode; randomness derives only from ``seed``."""

    @abstractmethod
    def step(self, state, action, draw):
        """Return ``(next_state, reward, done)``."""

    @abstractmethod
    def failure(self, state) -> int:
        """1 if ``state`` (or its vector form) is a failure state, else 0."""

    @abstractmethod
    def to_vector(self, state) -> np.ndarray: ...

    @abstractmethod
    def from_vector(self, vector) -> Any: ...

    def features(self, state) -> np.ndarray:
        """Observation used by tabular policies; defaults to the state vector."""
        return self.to_vector(state)

    def sample_config(self, seed: int, length: int) -> StochasticConfig:
        return sample_config(seed, length, self.draw_arity)

    def _header(self) -> bytes:
        return f"{self.name}/{self.schema_version}\n".encode()

    def snapshot(self, state) -> bytes:
        body = json.dumps([float(x) for x in self.to_vector(state)])
        return self._header() + body.encode()

    def restore(self, snapshot: bytes):
        header = self._header()
        if not snapshot.startswith(header):
            got = snapshot.split(b"\n", 1)[0].decode(errors="replace")
            raise InputError(f"snapshot belongs to {got!r}, not {header.decode().strip()!r}")
        return self.from_vector(json.loads(snapshot[len(header):]))


# ---------------------------------------------------------------------------
# Trajectories and failure cases


@dataclass(frozen=True)
class Transition:
    state: tuple
    action: Action
    reward: float
    next_state: tuple
    done: bool

    def to_json(self) -> dict:
        return {
            "state": list(self.state),
            "action": action_to_json(self.action),
            "reward": self.reward,
            "next_state": list(self.next_state),
            "done": self.done,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Transition":
        return cls(
            tuple(data["state"]),
            action_from_json(data["action"]),
            float(data["reward"]),
            tuple(data["next_state"]),
            bool(data["done"]),
        )


@dataclass(frozen=True)
class Trajectory:
    """Recorded episode.  ``failure_index`` counts transitions, so state
    ``n`` is the one reached after ``n`` actions."""

    transitions: tuple
    config: StochasticConfig
    failure_index: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "transitions", tuple(self.transitions))
        if len(self.config) < len(self.transitions):
            raise InputError("config has fewer draws than the trajectory has transitions")
        for t in self.transitions[:-1]:
            if t.done:
                raise InputError("a done transition must be the last one")

    def __len__(self) -> int:
        return len(self.transitions)

    @property
    def rewards(self) -> list:
        return [t.reward for t in self.transitions]

    @property
    def actions(self) -> list:
        return [t.action for t in self.transitions]

    def states(self) -> list:
        """All visited state vectors, including the initial and final one."""
        if not self.transitions:
            return []
        return [t.state for t in self.transitions] + [self.transitions[-1].next_state]

    def to_jsonl(self) -> str:
        lines = [json.dumps(t.to_json(), sort_keys=True) for t in self.transitions]
        trailer = {"config": self.config.to_json(), "failure_index": self.failure_index}
        lines.append(json.dumps(trailer, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Trajectory":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or "config" not in rows[-1]:
            raise InputError("trajectory stream lacks a trailer record")
        trailer = rows[-1]
        return cls(
            tuple(Transition.from_json(r) for r in rows[:-1]),
            StochasticConfig.from_json(trailer["config"]),
            trailer["failure_index"],
        )


@dataclass(frozen=True)
class FailureCase:
    case_id: str
    env_name: str
    start_snapshot: bytes
    factual_actions: tuple
    window_config: StochasticConfig
    failure_step: int = 0
    episode: int = 0

    def __post_init__(self):
        object.__setattr__(self, "factual_actions", tuple(self.factual_actions))
        if not self.factual_actions:
            raise InputError("a failure case needs at least one factual action")
        if len(self.window_config) < len(self.factual_actions):
            raise InputError("window config shorter than the factual window")

    @property
    def horizon_k(self) -> int:
        return len(self.factual_actions)

    def to_json(self) -> dict:
        return {
            "case_id": self.case_id,
            "env": self.env_name,
            "start_snapshot": base64.b64encode(self.start_snapshot).decode("ascii"),
            "factual_actions": [action_to_json(a) for a in self.factual_actions],
            "window_config": self.window_config.to_json(),
            "horizon_k": self.horizon_k,
            "failure_step": self.failure_step,
            "episode": self.episode,
        }

    @classmethod
    def from_json(cls, data: dict) -> "FailureCase":
        return cls(
            case_id=data["case_id"],
            env_name=data["env"],
            start_snapshot=base64.b64decode(data["start_snapshot"]),
            factual_actions=tuple(action_from_json(a) for a in data["factual_actions"]),
            window_config=StochasticConfig.from_json(data["window_config"]),
            failure_step=int(data.get("failure_step", 0)),
            episode=int(data.get("episode", 0)),
        )


# ---------------------------------------------------------------------------
# Replay


def run_actions(env: Environment, state, actions: Sequence, config: StochasticConfig):
    """Fast replay core: yield ``(state, action, reward, next_state, done)``.

    Stops after the first ``done``.  Actions are assumed validated.
    """
    if len(actions) > len(config):
        raise ReplayLengthError(f"{len(actions)} actions but only {len(config)} draws")
    draws = config.draws
    for t, action in enumerate(actions):
        nxt, reward, done = env.step(state, action, draws[t])
        yield state, action, reward, nxt, done
        if done:
            return
        state = nxt


def replay(env: Environment, start: bytes, actions: Sequence, config: StochasticConfig) -> Trajectory:
    """Replay ``actions`` from a snapshot under a fixed configuration.

    Identical inputs give bit-identical trajectories.  The replay stops early
    if the episode terminates.
    """
    actions = env.action_space.validate_sequence(actions)
    state = env.restore(start)
    transitions = []
    failure_index = None
    for i, (s, a, r, nxt, done) in enumerate(run_actions(env, state, actions, config)):
        transitions.append(
            Transition(tuple(env.to_vector(s)), a, float(r), tuple(env.to_vector(nxt)), bool(done))
        )
        if failure_index is None and env.failure(nxt):
            failure_index = i + 1
    return Trajectory(tuple(transitions), config, failure_index)


def avoids_failure(env: Environment, state, actions: Sequence, config: StochasticConfig,
                   terminal_only: bool = False) -> bool:
    """True when replaying ``actions`` never reaches a failure state.

    With ``terminal_only`` only the last reached state is checked.
    """
    last = state
    for _, _, _, nxt, _ in run_actions(env, state, actions, config):
        if not terminal_only and env.failure(nxt):
            return False
        last = nxt
    return not env.failure(last)
