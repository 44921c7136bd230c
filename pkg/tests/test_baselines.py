import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfseq.baselines import (
    BASELINES,
    CERTAIN,
    HIGHLIGHTS,
    LOCAL_MAX,
    LOCAL_MIN,
    boltzmann_entropy,
    entropy_index,
    first_local_extremum,
    highlights_index,
    local_extremum_index,
    run_baseline,
    select_timestep,
    single_change_search,
)
from cfseq.core import UnsupportedEnvironmentError
from cfseq.envs import make_env
from cfseq.envs.farm import HARVEST
from cfseq.envs.highway import IDLE, HighwayState
from cfseq.envs.nav import NavController, NavState
from cfseq.policy import collect_failures

from conftest import make_case, overripe_death_case, stopped_car_ahead, two_car_env


class TableQ:
    """Q-function stub keyed by the state object itself."""

    def __init__(self, rows):
        self.table = {i: np.asarray(r, dtype=float) for i, r in enumerate(rows)}

    def key(self, state):
        return state


def states(n):
    return list(range(n))


def test_highlights_picks_widest_spread():
    policy = TableQ([[0, 1], [0, 5], [0, 3]])
    assert highlights_index(policy, states(3)).timestep == 1


def test_highlights_ties_go_to_first():
    assert highlights_index(TableQ([[1, 2, 3]] * 4), states(4)).timestep == 0


@settings(max_examples=200)
@given(rows=st.lists(st.lists(st.integers(-50, 50), min_size=3, max_size=3), min_size=1, max_size=8),
       c=st.integers(1, 1000))
def test_highlights_invariant_under_scaling(rows, c):
    # Integer Q values and scales keep every product exact, so ties survive scaling.
    base = highlights_index(TableQ(rows), states(len(rows))).timestep
    scaled = highlights_index(TableQ([[c * x for x in r] for r in rows]), states(len(rows))).timestep
    assert base == scaled


def test_uniform_q_has_maximal_entropy():
    assert boltzmann_entropy(np.zeros(5)) == pytest.approx(math.log(5), abs=1e-15)
    assert boltzmann_entropy([3.0, 3.0, 3.0]) == pytest.approx(math.log(3), abs=1e-15)


def test_certain_and_uncertain_pick_opposite_states():
    policy = TableQ([[0, 0, 0, 0], [50, 0, 0, 0]])
    assert entropy_index(policy, states(2), "certain").timestep == 1
    assert entropy_index(policy, states(2), "uncertain").timestep == 0


def test_large_temperature_flattens_to_first_index():
    policy = TableQ([[0, 1, 2], [5, 0, 0], [1, 1, 0]])
    h = [boltzmann_entropy(r, 1e12) for r in policy.table.values()]
    assert h == pytest.approx([math.log(3)] * 3, abs=1e-9)


def test_local_min_reward():
    window = [(None, 3.0), (None, 1.0), (None, 2.0)]
    assert local_extremum_index(window, None, "min_reward").timestep == 1


def test_local_max_value_boundary():
    policy = TableQ([[1, 0], [2, 0], [3, 0]])
    window = [(0, 0.0), (1, 0.0), (2, 0.0)]
    assert local_extremum_index(window, policy, "max_value").timestep == 2


def test_constant_rewards_pick_first():
    assert first_local_extremum([4.0, 4.0, 4.0], "min") == 0


def test_every_sequence_has_a_local_extremum():
    # With infinite padding some point always qualifies; the None branch is defensive.
    rng = np.random.default_rng(0)
    for _ in range(200):
        v = rng.normal(size=rng.integers(1, 8))
        assert first_local_extremum(v, "min") is not None
        assert first_local_extremum(v, "max") is not None


def test_q_baselines_reject_continuous_env():
    env = make_env("continuous-nav")
    case = make_case(env, NavState(5.0, 1.0, 0), [(0.0,)])
    with pytest.raises(UnsupportedEnvironmentError):
        select_timestep(HIGHLIGHTS, env, None, case)


def test_no_alternative_gives_empty_set():
    env = make_env("mini-highway", lanes=1, vehicles=1)
    case = make_case(env, HighwayState(0, 0, 3, ((0, 1, 0, 0),)), [IDLE])
    res = single_change_search(env, case, 0, samples=3)
    assert not res.found and res.metadata["alternatives_tried"] == 4


def test_kept_sequences_change_exactly_one_position():
    env = two_car_env()
    case = make_case(env, stopped_car_ahead(gap=3, ego_speed=1), [IDLE, IDLE, IDLE])
    for t in range(3):
        res = single_change_search(env, case, t, samples=4)
        for m in res.members:
            assert m.properties.validity == 1
            assert m.properties.sparsity == 1
            assert m.properties.proximity == 1 / 3


def test_farm_overripe_case_keeps_harvest_substitution():
    env = make_env("mini-farm")
    case = overripe_death_case(env)
    res = single_change_search(env, case, 0, samples=5)
    assert res.metadata["alternatives_tried"] == 10
    seqs = {m.actions for m in res.members}
    assert (HARVEST,) + case.factual_actions[1:] in seqs


def test_continuous_search_samples_trials():
    env = make_env("continuous-nav")
    case = make_case(env, NavState(4.0, 1.5, 0), [(0.0,), (0.0,)])
    res = single_change_search(env, case, 0, trials=15, seed=3, samples=3)
    assert res.metadata["alternatives_tried"] == 15
    for m in res.members:
        assert m.properties.sparsity == 1 and m.properties.validity == 1
    again = single_change_search(env, case, 0, trials=15, seed=3, samples=3)
    assert [m.actions for m in again.members] == [m.actions for m in res.members]


def test_local_min_runs_on_nav_without_q():
    env = make_env("continuous-nav")
    cases = collect_failures(env, NavController(env, cruise=2.0, brake_at=9.0), 30, 5, seed=0)
    assert cases
    res = run_baseline(LOCAL_MIN, env, None, cases[0], trials=10, samples=3)
    assert res.method == LOCAL_MIN


def test_baseline_shape_on_trained_highway(highway_policy):
    env, policy = highway_policy
    cases = collect_failures(env, policy, 150, 5, seed=11)[:8]
    assert cases
    for case in cases:
        for method in BASELINES:
            res = run_baseline(method, env, policy, case, samples=4)
            for m in res.members:
                assert m.properties.sparsity == 1
                assert m.properties.proximity == 1 / case.horizon_k
                assert m.properties.validity == 1


def test_selectors_are_deterministic(highway_policy):
    env, policy = highway_policy
    case = collect_failures(env, policy, 100, 5, seed=4)[0]
    for method in (HIGHLIGHTS, CERTAIN, LOCAL_MAX):
        assert select_timestep(method, env, policy, case) == select_timestep(method, env, policy, case)
