"""Importance-based baselines with single-action repair.

Each baseline picks one timestep of the failure window and then tries
alternative actions at that timestep only, keeping every replacement that
avoids the failure.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .core import Environment, FailureCase, InputError, UnsupportedEnvironmentError, make_rng, replay
from .explanation import Counterfactual, ExplanationSet
from .policy import q_values
from .properties import DEFAULT_SAMPLES, CaseEvaluator

HIGHLIGHTS = "HIGHLIGHTS"
CERTAIN = "CERTAIN"
UNCERTAIN = "UNCERTAIN"
LOCAL_MIN = "LOCAL_MIN"
LOCAL_MAX = "LOCAL_MAX"
BASELINES = (HIGHLIGHTS, CERTAIN, UNCERTAIN, LOCAL_MIN, LOCAL_MAX)
NEEDS_Q = frozenset({HIGHLIGHTS, CERTAIN, UNCERTAIN, LOCAL_MAX})


@dataclass(frozen=True)
class ImportanceScore:
    timestep: int
    score: float


def _require_q(policy) -> None:
    if policy is None or not hasattr(policy, "table"):
        raise UnsupportedEnvironmentError("this baseline needs a Q-function over discrete actions")


def _q_matrix(policy, window_states) -> np.ndarray:
    _require_q(policy)
    if len(window_states) == 0:
        raise InputError("window must contain at least one state")
    return np.stack([q_values(policy, s) for s in window_states])


def highlights_index(policy, window_states) -> ImportanceScore:
    """Timestep with the widest gap between best and worst Q value."""
    q = _q_matrix(policy, window_states)
    spread = q.max(axis=1) - q.min(axis=1)
    t = int(np.argmax(spread))
    return ImportanceScore(t, float(spread[t]))


def boltzmann_entropy(q, temperature: float = 1.0) -> float:
    if temperature <= 0:
        raise InputError("temperature must be positive")
    z = np.asarray(q, dtype=float) / temperature
    z = z - z.max()
    p = np.exp(z)
    p /= p.sum()
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def entropy_index(policy, window_states, mode: str = "certain", temperature: float = 1.0) -> ImportanceScore:
    """Lowest-entropy (``certain``) or highest-entropy (``uncertain``) timestep."""
    q = _q_matrix(policy, window_states)
    h = np.array([boltzmann_entropy(row, temperature) for row in q])
    if mode == "certain":
        t = int(np.argmin(h))
    elif mode == "uncertain":
        t = int(np.argmax(h))
    else:
        raise InputError(f"unknown entropy mode {mode!r}")
    return ImportanceScore(t, float(h[t]))


def first_local_extremum(values, kind: str) -> int | None:
    """First index that is a local minimum/maximum under non-strict comparison.

    Missing neighbours count as +inf for minima and -inf for maxima.
    """
    v = list(values)
    if not v:
        raise InputError("window must contain at least one value")
    pad = math.inf if kind == "min" else -math.inf
    for t, x in enumerate(v):
        left = v[t - 1] if t > 0 else pad
        right = v[t + 1] if t + 1 < len(v) else pad
        if kind == "min" and x <= left and x <= right:
            return t
        if kind == "max" and x >= left and x >= right:
            return t
    return None


def local_extremum_index(window, policy=None, mode: str = "min_reward") -> ImportanceScore | None:
    """Local minimum of rewards or local maximum of state values over the window.

    ``window`` is a list of ``(state, reward)`` pairs.  Returns ``None`` when
    no point qualifies; :func:`select_timestep` then falls back to the
    global extremum.
    """
    if len(window) == 0:
        raise InputError("window must contain at least one entry")
    if mode == "min_reward":
        values = [float(r) for _, r in window]
        t = first_local_extremum(values, "min")
    elif mode == "max_value":
        values = list(_q_matrix(policy, [s for s, _ in window]).max(axis=1))
        t = first_local_extremum(values, "max")
    else:
        raise InputError(f"unknown local-extremum mode {mode!r}")
    return None if t is None else ImportanceScore(t, float(values[t]))


def window_trace(env: Environment, case: FailureCase) -> list:
    """``(state, reward)`` for each step of the factual window."""
    traj = replay(env, case.start_snapshot, case.factual_actions, case.window_config)
    return [(env.from_vector(t.state), t.reward) for t in traj.transitions]


def select_timestep(method: str, env: Environment, policy, case: FailureCase,
                    temperature: float = 1.0) -> ImportanceScore:
    if method in NEEDS_Q and not env.action_space.is_discrete:
        raise UnsupportedEnvironmentError(f"{method} needs discrete actions and Q-values")
    window = window_trace(env, case)
    states = [s for s, _ in window]
    if method == HIGHLIGHTS:
        return highlights_index(policy, states)
    if method == CERTAIN:
        return entropy_index(policy, states, "certain", temperature)
    if method == UNCERTAIN:
        return entropy_index(policy, states, "uncertain", temperature)
    if method == LOCAL_MIN:
        score = local_extremum_index(window, policy, "min_reward")
        if score is None:
            rewards = [r for _, r in window]
            t = int(np.argmin(rewards))
            score = ImportanceScore(t, float(rewards[t]))
        return score
    if method == LOCAL_MAX:
        score = local_extremum_index(window, policy, "max_value")
        if score is None:
            values = _q_matrix(policy, states).max(axis=1)
            t = int(np.argmax(values))
            score = ImportanceScore(t, float(values[t]))
        return score
    raise InputError(f"unknown baseline {method!r}")


def single_change_search(env: Environment, case: FailureCase, timestep: int, trials: int = 20,
                         seed: int = 0, samples: int = DEFAULT_SAMPLES, eps: float | None = None,
                         mc_seed: int = 0, method: str = "single-change",
                         terminal_only: bool = False) -> ExplanationSet:
    """Replace the action at ``timestep`` and keep every valid replacement.

    Discrete spaces are enumerated exhaustively; continuous spaces draw
    ``trials`` uniform actions inside the bounds.
    """
    k = case.horizon_k
    if not 0 <= timestep < k:
        raise InputError(f"timestep {timestep} outside window of length {k}")
    t0 = time.perf_counter()
    space = env.action_space
    factual = tuple(space.validate_sequence(case.factual_actions))
    if space.is_discrete:
        alternatives = [a for a in range(space.count) if a != factual[timestep]]
    else:
        rng = make_rng(seed)
        lo, hi = np.asarray(space.lower), np.asarray(space.upper)
        alternatives = [tuple(float(x) for x in rng.uniform(lo, hi)) for _ in range(trials)]
    evaluator = CaseEvaluator(env, case, samples, eps, mc_seed, terminal_only)
    members, seen = [], set()
    for alt in alternatives:
        seq = factual[:timestep] + (alt,) + factual[timestep + 1:]
        if seq in seen:
            continue
        seen.add(seq)
        props = evaluator(seq)
        if props.validity and props.sparsity == 1:
            members.append(Counterfactual(seq, props))
    return ExplanationSet(case.case_id, method, members, {
        "timestep": timestep,
        "alternatives_tried": len(alternatives),
        "seed": seed,
        "mc_seed": mc_seed,
        "samples": samples,
        "wall_time_s": round(time.perf_counter() - t0, 4),
    })


def run_baseline(method: str, env: Environment, policy, case: FailureCase, temperature: float = 1.0,
                 trials: int = 20, seed: int = 0, samples: int = DEFAULT_SAMPLES,
                 eps: float | None = None, mc_seed: int = 0, terminal_only: bool = False) -> ExplanationSet:
    score = select_timestep(method, env, policy, case, temperature)
    result = single_change_search(env, case, score.timestep, trials, seed, samples, eps, mc_seed,
                                  method, terminal_only)
    result.metadata["importance"] = score.score
    return result
