import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfseq.core import InputError, replay
from cfseq.envs import make_env
from cfseq.envs.highway import IDLE, HighwayState
from cfseq.nsga2 import (
    Candidate,
    NsgaConfig,
    Variation,
    assign_rank_and_crowding,
    crowding_distance,
    dominates,
    evolve,
    fast_nondominated_sort,
    initialize_population,
    make_children,
    one_point_crossover,
    select_survivors,
)
from cfseq.properties import CaseEvaluator

from conftest import make_case, stopped_car_ahead, two_car_env


def cand(obj, feasible=True):
    return Candidate(actions=tuple(obj), objectives=tuple(obj), feasible=feasible)


def brute_force_ranks(pop):
    """Rank = length of the longest domination chain ending at each member."""
    n = len(pop)
    rank = [None] * n
    remaining = set(range(n))
    r = 0
    while remaining:
        layer = {i for i in remaining if not any(dominates(pop[j], pop[i]) for j in remaining)}
        for i in layer:
            rank[i] = r
        remaining -= layer
        r += 1
    return rank


def fronts_to_ranks(fronts, n):
    rank = [None] * n
    for r, f in enumerate(fronts):
        for i in f:
            assert rank[i] is None
            rank[i] = r
    return rank


# -- domination ---------------------------------------------------------------


def test_feasible_beats_infeasible():
    assert dominates(cand((9, 9, 9, 9)), cand((0, 0, 0, 0), False))
    assert not dominates(cand((0, 0, 0, 0), False), cand((9, 9, 9, 9)))


def test_infeasible_pair_is_incomparable():
    a, b = cand((0, 0, 0, 0), False), cand((1, 1, 1, 1), False)
    assert not dominates(a, b) and not dominates(b, a)


def test_identical_vectors_do_not_dominate():
    a, b = cand((0.2, 1, 0.1, 0.1)), cand((0.2, 1, 0.1, 0.1))
    assert not dominates(a, b) and not dominates(b, a)


def test_elementwise_domination():
    assert dominates(cand((0.2, 1, 0.1, 0.1)), cand((0.4, 2, 0.2, 0.3)))
    assert not dominates(cand((0.2, 3, 0.1, 0.1)), cand((0.4, 2, 0.2, 0.3)))


# -- sorting ------------------------------------------------------------------


def test_identical_population_is_one_front():
    pop = [cand((1, 1, 1, 1)) for _ in range(6)]
    assert fast_nondominated_sort(pop) == [list(range(6))]


def test_chain_gives_singleton_fronts():
    pop = [cand((3, 3, 3, 3)), cand((1, 1, 1, 1)), cand((2, 2, 2, 2))]
    assert fast_nondominated_sort(pop) == [[1], [2], [0]]


def test_empty_population():
    assert fast_nondominated_sort([]) == []


objective = st.sampled_from([0.0, 0.2, 0.4, 0.6, 1.0])


@settings(max_examples=300, deadline=None)
@given(pop=st.lists(st.tuples(st.tuples(objective, objective, objective, objective), st.booleans()),
                    min_size=1, max_size=32))
def test_sort_matches_brute_force(pop):
    population = [cand(o, f) for o, f in pop]
    fronts = fast_nondominated_sort(population)
    assert sorted(i for f in fronts for i in f) == list(range(len(population)))
    assert fronts_to_ranks(fronts, len(population)) == brute_force_ranks(population)
    for i, fi in enumerate(fronts):
        for later in fronts[i:]:
            assert not any(dominates(population[q], population[p]) for p in fi for q in later)


# -- crowding -----------------------------------------------------------------


def test_crowding_small_fronts_are_infinite():
    assert crowding_distance([cand((1, 2))]) == [math.inf]
    assert crowding_distance([cand((1, 2)), cand((2, 1))]) == [math.inf, math.inf]


def test_crowding_collinear_middle_is_two():
    d = crowding_distance([cand((0, 2)), cand((1, 1)), cand((2, 0))])
    assert d == [math.inf, 2.0, math.inf]


def test_crowding_identical_front():
    d = crowding_distance([cand((1, 1)) for _ in range(5)])
    assert d.count(math.inf) == 2 and d.count(0.0) == 3


# -- operators ----------------------------------------------------------------


def test_one_point_crossover():
    a, b = ("A",) * 5, ("B",) * 5
    assert one_point_crossover(a, b, 2) == (("A", "A", "B", "B", "B"), ("B", "B", "A", "A", "A"))


def _setup(config, k=5, seed=0):
    env = make_env("mini-highway")
    case = make_case(env, env.reset(seed), [IDLE] * k, env.sample_config(seed, k))
    ev = CaseEvaluator(env, case, 5, None, 1)
    return env, case, ev, Variation(env, case, config, np.random.default_rng(config.seed))


def test_mutation_always_changes_with_rate_one_and_never_with_tiny_rate():
    cfg = NsgaConfig(p_mut=1.0)
    _, case, _, var = _setup(cfg)
    out = var.mutate(case.factual_actions)
    assert all(x != y for x, y in zip(out, case.factual_actions))
    _, case, ev, var = _setup(NsgaConfig(p_mut=1e-12))
    pop = initialize_population(case, NsgaConfig(p_mut=1e-12), ev, var)
    assert all(c.actions == case.factual_actions for c in pop)


def test_initial_population_contains_infeasible_factual():
    cfg = NsgaConfig(population=10)
    env = two_car_env()
    case = make_case(env, stopped_car_ahead(gap=3), [IDLE, IDLE, IDLE])
    ev = CaseEvaluator(env, case, 3, None, 0)
    pop = initialize_population(case, cfg, ev, Variation(env, case, cfg, np.random.default_rng(0)))
    assert len(pop) == 10
    assert pop[0].actions == case.factual_actions and not pop[0].feasible


def test_children_are_tournament_copies_without_variation():
    cfg = NsgaConfig(population=10, p_cx=0.0, p_mut=1e-12)
    env, case, ev, var = _setup(cfg)
    parents = initialize_population(case, NsgaConfig(population=10, p_mut=0.9), ev,
                                    Variation(env, case, NsgaConfig(p_mut=0.9), np.random.default_rng(1)))
    assign_rank_and_crowding(parents)
    children = make_children(parents, cfg, ev, var)
    assert len(children) == 10
    parent_seqs = {p.actions for p in parents}
    assert all(c.actions in parent_seqs for c in children)


def test_config_validation():
    with pytest.raises(InputError):
        NsgaConfig(population=7)
    with pytest.raises(InputError):
        NsgaConfig(generations=0)


# -- evolution ----------------------------------------------------------------


def _highway_case(seed):
    env = make_env("mini-highway")
    for s in itertools.count(seed):
        state = env.reset(s)
        cfg = env.sample_config(s, 12)
        traj = replay(env, env.snapshot(state), [2] * 12, cfg)
        if traj.failure_index is not None and traj.failure_index >= 3:
            n = traj.failure_index
            lo = max(0, n - 5)
            start = env.from_vector(traj.transitions[lo].state)
            return env, make_case(env, start, [2] * (n - lo), cfg.window(lo, n), f"hw-{s}")


def test_evolve_is_deterministic():
    env, case = _highway_case(0)
    a = evolve(env, case, NsgaConfig(population=20, generations=3, seed=4), samples=5, mc_seed=2)
    b = evolve(env, case, NsgaConfig(population=20, generations=3, seed=4), samples=5, mc_seed=2)
    a.metadata.pop("wall_time_s"), b.metadata.pop("wall_time_s")
    assert a.dumps() == b.dumps()


def test_evolve_output_is_valid_unique_and_nondominated():
    for seed in range(0, 40, 8):
        env, case = _highway_case(seed)
        res = evolve(env, case, NsgaConfig(population=20, generations=3, seed=seed), samples=5, mc_seed=1)
        seqs = [m.actions for m in res.members]
        assert len(seqs) == len(set(seqs))
        cands = [Candidate(m.actions, m.properties.objectives(), True) for m in res.members]
        for m in res.members:
            assert m.properties.validity == 1
        for a, b in itertools.permutations(cands, 2):
            assert not dominates(a, b)


def test_population_size_and_elitism_across_generations():
    env, case = _highway_case(3)
    history = []
    evolve(env, case, NsgaConfig(population=20, generations=5, seed=1), samples=5, mc_seed=1, history=history)
    assert len(history) == 6
    for prev, nxt in zip(history, history[1:]):
        assert len(nxt) == 20
        feasible = [c for c in nxt if c.feasible]
        if not any(c.feasible for c in prev):
            continue
        assert feasible
        best = min(feasible, key=lambda c: c.objectives)
        assert not any(dominates(p, best) for p in prev)


def test_single_flip_repair_is_found():
    # Stopped car three cells ahead, ego at speed 1: braking once avoids it,
    # as the exhaustive single-flip oracle confirms first.
    env = two_car_env()
    case = make_case(env, stopped_car_ahead(gap=3, ego_speed=1), [IDLE, IDLE, IDLE])
    flips = [case.factual_actions[:i] + (a,) + case.factual_actions[i + 1:]
             for i in range(3) for a in range(5) if a != IDLE]
    ev = CaseEvaluator(env, case, 5, None, 0)
    assert any(ev(f).validity for f in flips)
    res = evolve(env, case, NsgaConfig(population=50, generations=5, seed=0), samples=5)
    assert any(m.properties.sparsity == 1 for m in res.members)


def test_deterministic_env_gives_full_certainty():
    env = make_env("mini-highway", lanes=1, vehicles=1, p_lane=0.0)
    case = make_case(env, stopped_car_ahead(gap=3, ego_speed=1), [IDLE, IDLE, IDLE])
    res = evolve(env, case, NsgaConfig(population=20, generations=3, seed=2), samples=7)
    assert res.found
    assert all(m.properties.stochastic_certainty == 1.0 for m in res.members)


def test_unrepairable_case_returns_empty_set():
    env = make_env("mini-highway", lanes=1, vehicles=1)
    # Speed 3 with a stopped car one cell ahead: even braking to 2 hits it.
    case = make_case(env, HighwayState(0, 0, 3, ((0, 1, 0, 0),)), [IDLE])
    res = evolve(env, case, NsgaConfig(population=10, generations=2, seed=0), samples=3)
    assert not res.found and res.metadata["feasible_found"] is False


def test_select_survivors_fills_by_fronts():
    pop = [cand((i, 10 - i)) for i in range(6)] + [cand((20, 20)) for _ in range(4)]
    out = select_survivors(pop, 6)
    assert {c.objectives for c in out} == {(i, 10 - i) for i in range(6)}
