"""MiniFarm: one plant, daily watering, stochastic rain."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ..core import ActionSpace, Environment, InputError, make_rng

HARVEST = 10
SOIL_MAX = 20.0


class Stage(IntEnum):
    SEED = 0
    SPROUT = 1
    GROWING = 2
    RIPE = 3
    OVERRIPE = 4
    DEAD = 5
    HARVESTED = 6


ABSORBING = (Stage.DEAD, Stage.HARVESTED)


@dataclass(frozen=True)
class FarmState:
    stage: int
    soil_water: float
    day: int = 0
    in_band: int = 0   # consecutive days inside the healthy band
    out_band: int = 0  # consecutive days outside it
    ripe_days: int = 0


class MiniFarm(Environment):
    """Actions 0..9 water ``index + 1`` liters; action 10 harvests.

    Rain is exponential with mean ``rain_mean`` via the inverse CDF of the
    step's uniform draw, so a zero draw means a dry day.
    """

    name = "mini-farm"
    schema_version = 1
    draw_arity = 1

    def __init__(self, w_lo=6.0, w_hi=12.0, evap=0.3, rain_mean=1.5, d_stage=3, d_die=3,
                 d_ripe=4, overripe_after=2, r_harvest=10.0, r_stage=1.0, harvest_penalty=0.5,
                 initial_water=8.0, initial_jitter=2.0, max_steps=30):
        if not 0.0 <= w_lo < w_hi <= SOIL_MAX:
            raise InputError("healthy band must satisfy 0 <= w_lo < w_hi <= 20")
        if not 0.0 <= evap <= 1.0 or rain_mean < 0:
            raise InputError("invalid evaporation or rain parameters")
        if min(d_stage, d_die, d_ripe) < 1 or not 1 <= overripe_after <= d_ripe:
            raise InputError("stage clocks must be positive")
        self.w_lo, self.w_hi = float(w_lo), float(w_hi)
        self.evap = float(evap)
        self.rain_mean = float(rain_mean)
        self.d_stage, self.d_die, self.d_ripe = int(d_stage), int(d_die), int(d_ripe)
        self.overripe_after = int(overripe_after)
        self.r_harvest, self.r_stage = float(r_harvest), float(r_stage)
        self.harvest_penalty = float(harvest_penalty)
        self.initial_water = float(initial_water)
        self.initial_jitter = float(initial_jitter)
        self.max_steps = int(max_steps)
        self.action_space = ActionSpace.discrete(11)

    def params(self) -> dict:
        return {
            "w_lo": self.w_lo, "w_hi": self.w_hi, "evap": self.evap, "rain_mean": self.rain_mean,
            "d_stage": self.d_stage, "d_die": self.d_die, "d_ripe": self.d_ripe,
            "overripe_after": self.overripe_after, "r_harvest": self.r_harvest,
            "r_stage": self.r_stage, "harvest_penalty": self.harvest_penalty,
            "initial_water": self.initial_water, "initial_jitter": self.initial_jitter,
            "max_steps": self.max_steps,
        }

    def to_vector(self, state: FarmState) -> np.ndarray:
        return np.asarray([state.stage, state.soil_water, state.day, state.in_band,
                           state.out_band, state.ripe_days], dtype=float)

    def from_vector(self, vector) -> FarmState:
        v = np.asarray(vector, dtype=float)
        if v.shape != (6,) or not np.all(np.isfinite(v)):
            raise InputError(f"malformed {self.name} state vector of shape {v.shape}")
        if v[0] not in set(Stage) or not 0.0 <= v[1] <= SOIL_MAX:
            raise InputError("farm state outside its domain")
        return FarmState(int(v[0]), float(v[1]), int(v[2]), int(v[3]), int(v[4]), int(v[5]))

    def failure(self, state) -> int:
        if not isinstance(state, FarmState):
            state = self.from_vector(state)
        return int(state.stage == Stage.DEAD)

    def reset(self, seed: int) -> FarmState:
        rng = make_rng(seed)
        water = self.initial_water + self.initial_jitter * (2.0 * rng.random() - 1.0)
        return FarmState(int(Stage.SEED), float(min(max(water, 0.0), SOIL_MAX)))

    def rain(self, u: float) -> float:
        return -self.rain_mean * math.log1p(-u)

    def step(self, state: FarmState, action, draw):
        if not (isinstance(action, (int, np.integer)) and 0 <= action <= HARVEST):
            raise InputError(f"farm action {action!r} outside 0..10")
        stage = state.stage
        if stage in ABSORBING:
            return state, 0.0, True
        if action == HARVEST:
            if stage == Stage.RIPE:
                return FarmState(int(Stage.HARVESTED), state.soil_water, state.day + 1), self.r_harvest, True
            reward, water = -self.harvest_penalty, 0.0
        else:
            reward, water = 0.0, float(action + 1)

        soil = state.soil_water * (1.0 - self.evap) + water + self.rain(float(draw[0]))
        soil = min(max(soil, 0.0), SOIL_MAX)
        if self.w_lo <= soil <= self.w_hi:
            in_band, out_band = state.in_band + 1, 0
        else:
            in_band, out_band = 0, state.out_band + 1
        ripe_days = state.ripe_days

        if out_band >= self.d_die:
            stage = Stage.DEAD
        elif stage in (Stage.RIPE, Stage.OVERRIPE):
            ripe_days += 1
            if ripe_days >= self.d_ripe:
                stage = Stage.DEAD
            elif ripe_days >= self.overripe_after:
                stage = Stage.OVERRIPE
        elif in_band >= self.d_stage:
            stage += 1
            in_band = 0
            reward += self.r_stage

        day = state.day + 1
        nxt = FarmState(int(stage), soil, day, in_band, out_band, ripe_days)
        done = stage == Stage.DEAD or day >= self.max_steps
        return nxt, reward, bool(done)

    def features(self, state: FarmState) -> np.ndarray:
        return np.asarray([state.stage, state.soil_water, min(state.out_band, 2)], dtype=float)

    def feature_bins(self) -> list:
        return [(0.0, 7.0, 7), (0.0, SOIL_MAX, 10), (0.0, 3.0, 3)]
