"""Shared builders for hand-constructed scenarios and trained policies."""

import numpy as np
import pytest

from cfseq.core import FailureCase, StochasticConfig, replay, zero_config
from cfseq.envs import make_env
from cfseq.envs.farm import FarmState, Stage
from cfseq.envs.highway import HighwayState
from cfseq.policy import TrainConfig, train_tabular_q


# One "PASS/FAIL criterion ..." line per acceptance check, echoed at session end.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def make_case(env, state, actions, config=None, case_id="case-0"):
    config = config if config is not None else zero_config(len(actions), env.draw_arity)
    return FailureCase(case_id, env.name, env.snapshot(state), tuple(actions), config)


def two_car_env(**kw):
    """Single lane, one other car: the smallest highway that can crash."""
    return make_env("mini-highway", lanes=1, vehicles=1, **kw)


def stopped_car_ahead(gap=1, ego_speed=1):
    return HighwayState(0, 0, ego_speed, ((0, gap, 0, 0),), 0)


def wall_of_stopped_cars(env, ego_lane=1, ego_speed=3, at=2):
    others = tuple((lane, at, 0, 0) for lane in range(env.lanes))
    return HighwayState(ego_lane, 0, ego_speed, others, 0)


def ripe_farm_state(soil=8.0):
    return FarmState(int(Stage.RIPE), soil, 12, 0, 0, 0)


def overripe_death_case(env):
    """RIPE plant watered 3 L a day but never harvested: dies after d_ripe days."""
    start = ripe_farm_state()
    actions = (2,) * env.d_ripe
    case = make_case(env, start, actions)
    traj = replay(env, case.start_snapshot, actions, case.window_config)
    assert traj.failure_index == env.d_ripe
    return case


@pytest.fixture(scope="session")
def farm_policy():
    env = make_env("mini-farm")
    return env, train_tabular_q(env, TrainConfig(steps=20000, eps_decay_steps=10000, seed=0))


@pytest.fixture(scope="session")
def highway_policy():
    env = make_env("mini-highway")
    return env, train_tabular_q(env, TrainConfig(steps=200000, eps_decay_steps=100000, seed=0))


def config_from(rows):
    return StochasticConfig(0, np.asarray(rows, dtype=float))
