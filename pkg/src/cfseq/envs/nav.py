"""ContinuousNav: 1-D point mass that must hop over an obstacle interval."""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from ..core import ActionSpace, Environment, InputError, make_rng

_STD_NORMAL = NormalDist()
_EDGE = 1e-12


def wind_quantile(u: float) -> float:
    """Standard normal quantile of ``u`` shifted by one half, so u = 0 maps to 0."""
    p = (u + 0.5) % 1.0
    return _STD_NORMAL.inv_cdf(min(max(p, _EDGE), 1.0 - _EDGE))


@dataclass(frozen=True)
class NavState:
    position: float
    velocity: float
    t: int = 0


class ContinuousNav(Environment):
    name = "continuous-nav"
    schema_version = 1
    draw_arity = 1

    def __init__(self, obstacle_lo=6.0, obstacle_hi=7.0, goal=9.0, goal_tol=0.25, sigma_wind=0.05,
                 pos_max=10.0, vel_max=2.0, max_steps=25):
        if not 0.0 <= obstacle_lo <= obstacle_hi <= pos_max:
            raise InputError("obstacle must lie inside the track")
        self.obstacle_lo, self.obstacle_hi = float(obstacle_lo), float(obstacle_hi)
        self.goal, self.goal_tol = float(goal), float(goal_tol)
        self.sigma_wind = float(sigma_wind)
        self.pos_max, self.vel_max = float(pos_max), float(vel_max)
        self.max_steps = int(max_steps)
        self.action_space = ActionSpace.continuous([-1.0], [1.0])

    def params(self) -> dict:
        return {
            "obstacle_lo": self.obstacle_lo, "obstacle_hi": self.obstacle_hi, "goal": self.goal,
            "goal_tol": self.goal_tol, "sigma_wind": self.sigma_wind, "pos_max": self.pos_max,
            "vel_max": self.vel_max, "max_steps": self.max_steps,
        }

    def to_vector(self, state: NavState) -> np.ndarray:
        return np.asarray([state.position, state.velocity, state.t], dtype=float)

    def from_vector(self, vector) -> NavState:
        v = np.asarray(vector, dtype=float)
        if v.shape != (3,) or not np.all(np.isfinite(v)):
            raise InputError(f"malformed {self.name} state vector of shape {v.shape}")
        if not (0.0 <= v[0] <= self.pos_max and abs(v[1]) <= self.vel_max):
            raise InputError("nav state outside its box")
        return NavState(float(v[0]), float(v[1]), int(v[2]))

    def failure(self, state) -> int:
        if not isinstance(state, NavState):
            state = self.from_vector(state)
        return int(self.obstacle_lo <= state.position <= self.obstacle_hi)

    def reset(self, seed: int) -> NavState:
        rng = make_rng(seed)
        return NavState(float(1.5 * rng.random()), 0.0, 0)

    def step(self, state: NavState, action, draw):
        a = action[0] if isinstance(action, tuple) else action
        if not -1.0 <= a <= 1.0:
            raise InputError(f"nav action {action!r} outside [-1, 1]")
        wind = self.sigma_wind * wind_quantile(float(draw[0])) if self.sigma_wind else 0.0
        velocity = min(max(state.velocity + a + wind, -self.vel_max), self.vel_max)
        position = min(max(state.position + velocity, 0.0), self.pos_max)
        nxt = NavState(position, velocity, state.t + 1)
        reward = -abs(position - self.goal)
        done = (self.failure(nxt) == 1 or abs(position - self.goal) <= self.goal_tol
                or nxt.t >= self.max_steps)
        return nxt, reward, bool(done)


class NavController:
    """Scripted cruise controller: hold a target speed, then brake near the goal."""

    def __init__(self, env: ContinuousNav, cruise: float = 1.8, brake_at: float = 7.5):
        self.env = env
        self.cruise = cruise
        self.brake_at = brake_at

    def act(self, state: NavState) -> tuple:
        if state.position >= self.brake_at:
            target = max(0.0, min(self.cruise, self.env.goal - state.position) * 0.5)
        else:
            target = self.cruise
        return (float(np.clip(target - state.velocity, -1.0, 1.0)),)

    def to_json(self) -> dict:
        return {"kind": "scripted-nav", "cruise": self.cruise, "brake_at": self.brake_at}
