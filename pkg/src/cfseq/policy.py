"""Tabular Q-learning policies and failure-case collection."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Environment,
    FailureCase,
    InputError,
    Trajectory,
    Transition,
    UnsupportedEnvironmentError,
    derive_seed,
    make_rng,
)


@dataclass(frozen=True)
class Discretizer:
    """Uniform binning, one ``(low, high, bins)`` triple per feature."""

    bins: tuple

    def key(self, features) -> tuple:
        out = []
        for x, (lo, hi, n) in zip(features, self.bins):
            idx = int((x - lo) / (hi - lo) * n)
            out.append(min(max(idx, 0), n - 1))
        return tuple(out)

    def to_json(self) -> list:
        return [list(b) for b in self.bins]

    @classmethod
    def from_json(cls, data) -> "Discretizer":
        return cls(tuple((float(lo), float(hi), int(n)) for lo, hi, n in data))


@dataclass
class QFunction:
    env: Environment
    discretizer: Discretizer
    table: dict = field(default_factory=dict)

    @property
    def n_actions(self) -> int:
        return self.env.action_space.count

    def key(self, state) -> tuple:
        return self.discretizer.key(self.env.features(state))

    def act(self, state) -> int:
        return greedy_action(q_values(self, state))

    def to_json(self) -> dict:
        rows = {",".join(map(str, k)): [float(x) for x in v] for k, v in sorted(self.table.items())}
        return {
            "env": self.env.name,
            "n_actions": self.n_actions,
            "discretizer": self.discretizer.to_json(),
            "table": rows,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, data: dict, env: Environment) -> "QFunction":
        if data["env"] != env.name:
            raise InputError(f"policy trained on {data['env']}, not {env.name}")
        table = {
            tuple(int(x) for x in k.split(",")) if k else (): np.asarray(v, dtype=float)
            for k, v in data["table"].items()
        }
        return cls(env, Discretizer.from_json(data["discretizer"]), table)


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 20000
    learning_rate: float = 0.1
    discount: float = 0.95
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise InputError("steps must be non-negative")
        if not 0.0 < self.learning_rate <= 1.0 or not 0.0 < self.discount <= 1.0:
            raise InputError("learning rate and discount must lie in (0, 1]")
        if not self.eps_start >= self.eps_end >= 0.0:
            raise InputError("exploration schedule needs start >= end >= 0")

    def epsilon(self, step: int) -> float:
        if self.eps_decay_steps <= 0:
            return self.eps_end
        frac = min(1.0, step / self.eps_decay_steps)
        return self.eps_start + frac * (self.eps_end - self.eps_start)


def greedy_action(q: np.ndarray) -> int:
    """Argmax with lowest-index tie-breaking."""
    return int(np.argmax(q))


def q_values(policy: QFunction, state) -> np.ndarray:
    q = policy.table.get(policy.key(state))
    if q is None:
        return np.zeros(policy.n_actions)
    return q.copy()


def train_tabular_q(env: Environment, config: TrainConfig) -> QFunction:
    """One-step Q-learning with an epsilon-greedy behaviour policy."""
    if not env.action_space.is_discrete:
        raise UnsupportedEnvironmentError(f"{env.name} has continuous actions; tabular Q needs discrete")
    bins = env.feature_bins() if hasattr(env, "feature_bins") else None
    if bins is None:
        raise UnsupportedEnvironmentError(f"{env.name} declares no feature binning")
    policy = QFunction(env, Discretizer(tuple(bins)))
    table = policy.table
    n = policy.n_actions
    rng = make_rng(config.seed)

    def new_episode(i):
        s = env.reset(derive_seed(config.seed, f"reset:{i}"))
        cfg = env.sample_config(derive_seed(config.seed, f"episode:{i}"), env.max_steps)
        return s, cfg.draws

    episode = 0
    state, draws = new_episode(episode)
    key = policy.key(state)
    t = 0
    for step in range(config.steps):
        q = table.get(key)
        if q is None:
            q = table[key] = np.zeros(n)
        if rng.random() < config.epsilon(step):
            action = int(rng.integers(n))
        else:
            action = greedy_action(q)
        nxt, reward, done = env.step(state, action, draws[t])
        nkey = policy.key(nxt)
        target = reward
        if not done:
            nq = table.get(nkey)
            if nq is not None:
                target += config.discount * float(nq.max())
        q[action] += config.learning_rate * (target - q[action])
        t += 1
        if done:
            episode += 1
            state, draws = new_episode(episode)
            key = policy.key(state)
            t = 0
        else:
            state, key = nxt, nkey
    return policy


def rollout(env: Environment, policy, initial_state, config) -> Trajectory:
    """Run ``policy`` greedily until done under ``config``."""
    transitions = []
    state = initial_state
    failure_index = None
    for t in range(len(config)):
        action = env.action_space.validate(policy.act(state))
        nxt, reward, done = env.step(state, action, config.draws[t])
        transitions.append(Transition(tuple(env.to_vector(state)), action, float(reward),
                                      tuple(env.to_vector(nxt)), bool(done)))
        if env.failure(nxt):
            failure_index = t + 1
            if not done:
                raise InputError(f"{env.name} reached a failure state without terminating")
        if done:
            break
        state = nxt
    return Trajectory(tuple(transitions), config, failure_index)


def episode_seeds(seed: int, i: int) -> tuple:
    return derive_seed(seed, f"reset:{i}"), derive_seed(seed, f"episode:{i}")


def collect_failures(env: Environment, policy, episodes: int, k: int, seed: int,
                     return_trajectories: bool = False):
    """Roll out ``episodes`` greedy episodes and cut a FailureCase from each failure.

    The case window is the ``k`` actions before the failure, or fewer if the
    failure happens within the first ``k`` steps.
    """
    if k < 1:
        raise InputError("k must be at least 1")
    cases, trajectories = [], []
    for i in range(episodes):
        reset_seed, config_seed = episode_seeds(seed, i)
        start = env.reset(reset_seed)
        config = env.sample_config(config_seed, env.max_steps)
        traj = rollout(env, policy, start, config)
        if traj.failure_index is None:
            continue
        n = traj.failure_index
        lo = max(0, n - k)
        start_state = env.from_vector(traj.transitions[lo].state)
        cases.append(FailureCase(
            case_id=f"{env.name}-{i:05d}",
            env_name=env.name,
            start_snapshot=env.snapshot(start_state),
            factual_actions=tuple(traj.actions[lo:n]),
            window_config=config.window(lo, n),
            failure_step=n,
            episode=i,
        ))
        trajectories.append(traj)
    return (cases, trajectories) if return_trajectories else cases


def failure_rate(env: Environment, policy, episodes: int, seed: int) -> float:
    failures = 0
    for i in range(episodes):
        reset_seed, config_seed = episode_seeds(seed, i)
        traj = rollout(env, policy, env.reset(reset_seed), env.sample_config(config_seed, env.max_steps))
        failures += traj.failure_index is not None
    return failures / episodes
