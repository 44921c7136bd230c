"""MiniHighway: a ring-road lane grid with rule-based traffic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ActionSpace, Environment, InputError, make_rng

LEFT, RIGHT, FASTER, SLOWER, IDLE = range(5)
ACTION_NAMES = ("LEFT", "RIGHT", "FASTER", "SLOWER", "IDLE")
MAX_SPEED = 3
GAP_CAP = 4


@dataclass(frozen=True)
class HighwayState:
    """Ego pose plus one ``(lane, cell, speed, desired_speed)`` per other car."""

    ego_lane: int
    ego_cell: int
    ego_speed: int
    others: tuple
    t: int = 0


class MiniHighway(Environment):
    name = "mini-highway"
    schema_version = 1

    def __init__(self, lanes=3, cells=20, vehicles=3, p_lane=0.1, w_speed=0.1,
                 w_crash=1.0, w_lane=0.05, max_steps=40):
        if lanes < 1 or cells < 4 or vehicles < 0:
            raise InputError("invalid highway geometry")
        if not 0.0 <= p_lane <= 1.0:
            raise InputError("p_lane must lie in [0, 1]")
        self.lanes = int(lanes)
        self.cells = int(cells)
        self.vehicles = int(vehicles)
        self.p_lane = float(p_lane)
        self.w_speed = float(w_speed)
        self.w_crash = float(w_crash)
        self.w_lane = float(w_lane)
        self.max_steps = int(max_steps)
        self.action_space = ActionSpace.discrete(5)
        self.draw_arity = max(1, 2 * self.vehicles)

    def params(self) -> dict:
        return {
            "lanes": self.lanes, "cells": self.cells, "vehicles": self.vehicles,
            "p_lane": self.p_lane, "w_speed": self.w_speed, "w_crash": self.w_crash,
            "w_lane": self.w_lane, "max_steps": self.max_steps,
        }

    # -- state encoding ---------------------------------------------------

    def to_vector(self, state: HighwayState) -> np.ndarray:
        flat = [state.t, state.ego_lane, state.ego_cell, state.ego_speed]
        for car in state.others:
            flat.extend(car)
        return np.asarray(flat, dtype=float)

    def from_vector(self, vector) -> HighwayState:
        v = np.asarray(vector, dtype=float)
        if v.ndim != 1 or v.size != 4 + 4 * self.vehicles or not np.all(np.isfinite(v)):
            raise InputError(f"malformed {self.name} state vector of shape {v.shape}")
        if np.any(v != np.round(v)):
            raise InputError("highway state entries must be integers")
        iv = [int(x) for x in v]
        others = tuple(tuple(iv[4 + 4 * i: 8 + 4 * i]) for i in range(self.vehicles))
        state = HighwayState(iv[1], iv[2], iv[3], others, iv[0])
        self._check(state)
        return state

    def _check(self, state: HighwayState) -> None:
        cars = [(state.ego_lane, state.ego_cell, state.ego_speed, MAX_SPEED)] + list(state.others)
        for lane, cell, speed, desired in cars:
            if not (0 <= lane < self.lanes and 0 <= cell < self.cells
                    and 0 <= speed <= MAX_SPEED and 0 <= desired <= MAX_SPEED):
                raise InputError("highway state outside grid bounds")

    # -- dynamics -----------------------------------------------------------

    def failure(self, state) -> int:
        if not isinstance(state, HighwayState):
            state = self.from_vector(state)
        seen = {(state.ego_lane, state.ego_cell)}
        for lane, cell, _, _ in state.others:
            if (lane, cell) in seen:
                return 1
            seen.add((lane, cell))
        return 0

    def reset(self, seed: int) -> HighwayState:
        rng = make_rng(seed)
        ego_lane = int(rng.integers(self.lanes))
        taken = {(ego_lane, c % self.cells) for c in range(-2, 4)}
        free = [(l, c) for l in range(self.lanes) for c in range(self.cells) if (l, c) not in taken]
        picks = rng.choice(len(free), size=self.vehicles, replace=False)
        others = []
        for idx in sorted(int(i) for i in picks):
            lane, cell = free[idx]
            desired = int(rng.integers(1, 3))
            others.append((lane, cell, desired, desired))
        return HighwayState(ego_lane, 0, 1, tuple(others), 0)

    def _gap(self, lane: int, cell: int, occupied) -> int:
        """Cells to the nearest car ahead in ``lane`` (0 = same cell), capped."""
        for d in range(GAP_CAP):
            if (lane, (cell + d) % self.cells) in occupied:
                return d
        return GAP_CAP

    def step(self, state: HighwayState, action, draw):
        lane, cell, speed = state.ego_lane, state.ego_cell, state.ego_speed
        if action == LEFT:
            lane = max(0, lane - 1)
        elif action == RIGHT:
            lane = min(self.lanes - 1, lane + 1)
        elif action == FASTER:
            speed = min(MAX_SPEED, speed + 1)
        elif action == SLOWER:
            speed = max(0, speed - 1)
        elif action != IDLE:
            raise InputError(f"highway action {action!r} outside 0..4")

        cars = [list(c) for c in state.others]
        occupied = {(lane, cell)} | {(c[0], c[1]) for c in cars}
        threshold = 1.0 - self.p_lane
        for i, car in enumerate(cars):
            if self.p_lane > 0.0 and draw[2 * i] >= threshold:
                target = car[0] - 1 if draw[2 * i + 1] < 0.5 else car[0] + 1
                if 0 <= target < self.lanes and (target, car[1]) not in occupied:
                    occupied.discard((car[0], car[1]))
                    car[0] = target
                    occupied.add((car[0], car[1]))
        for car in cars:
            # Gap counted from the next cell so a car never drives into anything ahead.
            ahead = self._gap(car[0], car[1] + 1, occupied)
            car[2] = min(car[3], car[2] + 1, ahead)

        new_cell = (cell + speed) % self.cells
        crash_at = None
        best = None
        for car in cars:
            if car[0] != lane:
                continue
            d = (car[1] - cell) % self.cells
            if d == 0 or speed >= d + car[2]:
                if best is None or d < best:
                    best, crash_at = d, (car[1] + car[2]) % self.cells
        if crash_at is not None:
            new_cell = crash_at
        for car in cars:
            car[1] = (car[1] + car[2]) % self.cells

        nxt = HighwayState(lane, new_cell, speed, tuple(tuple(c) for c in cars), state.t + 1)
        crashed = self.failure(nxt)
        reward = (self.w_speed * speed - self.w_crash * crashed
                  - self.w_lane * (lane != self.lanes - 1))
        done = bool(crashed) or nxt.t >= self.max_steps
        return nxt, reward, done

    def features(self, state: HighwayState) -> np.ndarray:
        occupied = {(c[0], c[1]) for c in state.others}
        gaps = []
        for lane in (state.ego_lane - 1, state.ego_lane, state.ego_lane + 1):
            if 0 <= lane < self.lanes:
                gaps.append(self._gap(lane, state.ego_cell + (lane == state.ego_lane), occupied))
            else:
                gaps.append(0)
        return np.asarray([state.ego_lane, state.ego_speed, *gaps], dtype=float)

    def feature_bins(self) -> list:
        g = (0.0, GAP_CAP + 1.0, GAP_CAP + 1)
        return [(0.0, float(self.lanes), self.lanes), (0.0, MAX_SPEED + 1.0, MAX_SPEED + 1), g, g, g]
