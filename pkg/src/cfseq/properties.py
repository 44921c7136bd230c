"""Counterfactual property evaluators.

All evaluators compare a candidate action sequence against the factual
window of a :class:`~cfseq.core.FailureCase`.  Positions are ordered oldest
first, so the last element is the action taken right before the failure.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import (
    ActionSpace,
    Environment,
    FailureCase,
    InputError,
    avoids_failure,
    derive_seed,
)

DEFAULT_SAMPLES = 20
DEFAULT_EPS_FRACTION = 1e-6


@dataclass(frozen=True)
class PropertyVector:
    validity: int
    proximity: float
    sparsity: int
    stochastic_certainty: float
    recency: float

    def __post_init__(self):
        values = (self.validity, self.proximity, self.sparsity, self.stochastic_certainty, self.recency)
        if not all(math.isfinite(v) for v in values):
            raise InputError("property values must be finite")

    def objectives(self) -> tuple:
        """Minimisation objectives used by the evolutionary search."""
        return (self.proximity, float(self.sparsity), 1.0 - self.stochastic_certainty, self.recency)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "PropertyVector":
        return cls(int(data["validity"]), float(data["proximity"]), int(data["sparsity"]),
                   float(data["stochastic_certainty"]), float(data["recency"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def default_eps(space: ActionSpace) -> float:
    if space.is_discrete:
        return 0.0
    return DEFAULT_EPS_FRACTION * float(np.max(space.ranges))


def _check_pair(factual, candidate, space: ActionSpace) -> tuple:
    if len(factual) != len(candidate):
        raise InputError(f"sequence lengths differ: {len(factual)} vs {len(candidate)}")
    if len(factual) == 0:
        raise InputError("sequences must be non-empty")
    return space.validate_sequence(factual), space.validate_sequence(candidate)


def changed_mask(factual, candidate, space: ActionSpace, eps: float | None = None) -> list:
    """Per-position change flags: inequality, or L-infinity distance above ``eps``."""
    factual, candidate = _check_pair(factual, candidate, space)
    if space.is_discrete:
        return [a != b for a, b in zip(factual, candidate)]
    if eps is None:
        eps = default_eps(space)
    if eps < 0:
        raise InputError("eps must be non-negative")
    return [max(abs(x - y) for x, y in zip(a, b)) > eps for a, b in zip(factual, candidate)]


def proximity(factual, candidate, space: ActionSpace) -> float:
    factual, candidate = _check_pair(factual, candidate, space)
    k = len(factual)
    if space.is_discrete:
        return sum(a != b for a, b in zip(factual, candidate)) / k
    diff = np.abs(np.asarray(factual) - np.asarray(candidate)) / space.ranges
    return float(diff.sum() / k)


def sparsity(factual, candidate, space: ActionSpace, eps: float | None = None) -> int:
    return int(sum(changed_mask(factual, candidate, space, eps)))


def recency_weights(k: int) -> np.ndarray:
    """Weights per position, oldest first.

    The most recent action has weight ``2/(k(k+1))`` and the oldest
    ``2k/(k(k+1))``; they sum to one.
    """
    if k < 1:
        raise InputError("k must be at least 1")
    i = np.arange(k, 0, -1, dtype=float)
    return i * 2.0 / (k * (k + 1))


def recency(factual, candidate, space: ActionSpace, eps: float | None = None) -> float:
    mask = changed_mask(factual, candidate, space, eps)
    w = recency_weights(len(mask))
    return float(sum(wi for wi, m in zip(w, mask) if m))


def validity(env: Environment, case: FailureCase, candidate, terminal_only: bool = False) -> int:
    """1 if the candidate avoids failure under the captured configuration.

    By default every state reached inside the window must be failure-free;
    ``terminal_only`` checks only the last reached state.
    """
    if len(candidate) != case.horizon_k:
        raise InputError(f"candidate length {len(candidate)} != window length {case.horizon_k}")
    candidate = env.action_space.validate_sequence(candidate)
    start = env.restore(case.start_snapshot)
    return int(avoids_failure(env, start, candidate, case.window_config, terminal_only))


def monte_carlo_configs(env: Environment, length: int, samples: int, seed: int) -> list:
    if samples < 1:
        raise InputError("samples must be at least 1")
    return [env.sample_config(derive_seed(seed, f"mc:{i}"), length) for i in range(samples)]


def stochastic_uncertainty(env: Environment, case: FailureCase, candidate,
                           samples: int = DEFAULT_SAMPLES, seed: int = 0,
                           terminal_only: bool = False) -> float:
    """Fraction of freshly sampled configurations under which the candidate avoids failure."""
    if len(candidate) != case.horizon_k:
        raise InputError(f"candidate length {len(candidate)} != window length {case.horizon_k}")
    candidate = env.action_space.validate_sequence(candidate)
    start = env.restore(case.start_snapshot)
    configs = monte_carlo_configs(env, case.horizon_k, samples, seed)
    ok = sum(avoids_failure(env, start, candidate, cfg, terminal_only) for cfg in configs)
    return ok / samples


def evaluate_properties(env: Environment, case: FailureCase, candidate,
                        samples: int = DEFAULT_SAMPLES, eps: float | None = None,
                        seed: int = 0, terminal_only: bool = False) -> PropertyVector:
    space = env.action_space
    factual = case.factual_actions
    return PropertyVector(
        validity=validity(env, case, candidate, terminal_only),
        proximity=proximity(factual, candidate, space),
        sparsity=sparsity(factual, candidate, space, eps),
        stochastic_certainty=stochastic_uncertainty(env, case, candidate, samples, seed, terminal_only),
        recency=recency(factual, candidate, space, eps),
    )


class CaseEvaluator:
    """Memoised property evaluation for one failure case.

    Results equal :func:`evaluate_properties` with the same arguments; the
    start state and Monte-Carlo configurations are built once and each unique
    action sequence is replayed only once.
    """

    def __init__(self, env: Environment, case: FailureCase, samples: int = DEFAULT_SAMPLES,
                 eps: float | None = None, seed: int = 0, terminal_only: bool = False):
        self.env = env
        self.case = case
        self.space = env.action_space
        self.samples = samples
        self.eps = default_eps(self.space) if eps is None else eps
        self.seed = seed
        self.terminal_only = terminal_only
        self.start = env.restore(case.start_snapshot)
        self.factual = self.space.validate_sequence(case.factual_actions)
        self.configs = monte_carlo_configs(env, case.horizon_k, samples, seed)
        self.cache: dict = {}
        self.weights = recency_weights(case.horizon_k)

    def __call__(self, candidate) -> PropertyVector:
        key = tuple(candidate)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        if len(key) != self.case.horizon_k:
            raise InputError(f"candidate length {len(key)} != window length {self.case.horizon_k}")
        env, start, only = self.env, self.start, self.terminal_only
        valid = avoids_failure(env, start, key, self.case.window_config, only)
        ok = sum(avoids_failure(env, start, key, cfg, only) for cfg in self.configs)
        mask = changed_mask(self.factual, key, self.space, self.eps)
        props = PropertyVector(
            validity=int(valid),
            proximity=proximity(self.factual, key, self.space),
            sparsity=int(sum(mask)),
            stochastic_certainty=ok / self.samples,
            recency=float(sum(w for w, m in zip(self.weights, mask) if m)),
        )
        self.cache[key] = props
        return props
