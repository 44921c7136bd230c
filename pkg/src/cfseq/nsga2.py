"""Constrained NSGA-II over action sequences.

Validity is a hard constraint and the remaining four properties are
minimised: proximity, sparsity, one minus stochastic certainty and recency.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import Environment, FailureCase, InputError, make_rng
from .explanation import Counterfactual, ExplanationSet
from .properties import DEFAULT_SAMPLES, CaseEvaluator, PropertyVector

METHOD = "NSGA-II"
INF = math.inf


@dataclass
class Candidate:
    actions: tuple
    objectives: tuple = ()
    feasible: bool = False
    properties: PropertyVector | None = None
    rank: int | None = None
    crowding: float | None = None

    @classmethod
    def evaluated(cls, actions, evaluator) -> "Candidate":
        props = evaluator(actions)
        return cls(tuple(actions), props.objectives(), bool(props.validity), props)


@dataclass(frozen=True)
class NsgaConfig:
    population: int = 50
    generations: int = 5
    p_mut: float | None = None  # None means 1/k
    p_cx: float = 0.9
    tournament: int = 2
    sigma: float = 0.1  # fraction of the action range, continuous spaces only
    seed: int = 0

    def __post_init__(self):
        if self.population < 2 or self.population % 2:
            raise InputError("population must be an even number >= 2")
        if self.generations < 1:
            raise InputError("generations must be positive")
        if self.p_mut is not None and not 0.0 < self.p_mut <= 1.0:
            raise InputError("p_mut must lie in (0, 1]")
        if not 0.0 <= self.p_cx <= 1.0:
            raise InputError("p_cx must lie in [0, 1]")
        if self.tournament < 2:
            raise InputError("tournament size must be at least 2")
        if self.sigma <= 0:
            raise InputError("sigma must be positive")

    def mutation_rate(self, k: int) -> float:
        return 1.0 / k if self.p_mut is None else self.p_mut


def dominates(a: Candidate, b: Candidate) -> bool:
    """Constrained Pareto domination with a binary feasibility flag."""
    if a.feasible != b.feasible:
        return a.feasible
    if not a.feasible:
        return False
    strictly = False
    for x, y in zip(a.objectives, b.objectives):
        if x > y:
            return False
        if x < y:
            strictly = True
    return strictly


def fast_nondominated_sort(population: list) -> list:
    """Partition ``population`` into fronts; returns lists of indices, best front first."""
    n = len(population)
    dominated_by = [[] for _ in range(n)]
    counts = [0] * n
    for p in range(n):
        for q in range(p + 1, n):
            if dominates(population[p], population[q]):
                dominated_by[p].append(q)
                counts[q] += 1
            elif dominates(population[q], population[p]):
                dominated_by[q].append(p)
                counts[p] += 1
    fronts = []
    current = [i for i in range(n) if counts[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for p in current:
            for q in dominated_by[p]:
                counts[q] -= 1
                if counts[q] == 0:
                    nxt.append(q)
        current = sorted(nxt)
    return fronts


def crowding_distance(front: list) -> list:
    size = len(front)
    if size <= 2:
        return [INF] * size
    dist = [0.0] * size
    for m in range(len(front[0].objectives)):
        order = sorted(range(size), key=lambda i: front[i].objectives[m])
        lo = front[order[0]].objectives[m]
        hi = front[order[-1]].objectives[m]
        dist[order[0]] = dist[order[-1]] = INF
        span = hi - lo
        if span == 0:
            continue
        for j in range(1, size - 1):
            i = order[j]
            if dist[i] != INF:
                dist[i] += (front[order[j + 1]].objectives[m] - front[order[j - 1]].objectives[m]) / span
    return dist


def assign_rank_and_crowding(population: list) -> list:
    fronts = fast_nondominated_sort(population)
    for r, idx in enumerate(fronts):
        members = [population[i] for i in idx]
        for c, d in zip(members, crowding_distance(members)):
            c.rank, c.crowding = r, d
    return fronts


class Variation:
    """Mutation and crossover operators bound to one case's action space."""

    def __init__(self, env: Environment, case: FailureCase, config: NsgaConfig, rng: np.random.Generator):
        self.space = env.action_space
        self.k = case.horizon_k
        self.p_mut = config.mutation_rate(self.k)
        self.config = config
        self.rng = rng
        if not self.space.is_discrete:
            self.lower = np.asarray(self.space.lower)
            self.upper = np.asarray(self.space.upper)
            self.sigma = config.sigma * self.space.ranges

    def mutate(self, actions) -> tuple:
        rng = self.rng
        out = list(actions)
        for i, a in enumerate(out):
            if rng.random() >= self.p_mut:
                continue
            if self.space.is_discrete:
                alt = int(rng.integers(self.space.count - 1))
                out[i] = alt + (alt >= a)
            else:
                vec = np.clip(np.asarray(a) + rng.normal(0.0, self.sigma), self.lower, self.upper)
                out[i] = tuple(float(x) for x in vec)
        return tuple(out)

    def crossover(self, a, b) -> tuple:
        if self.k < 2 or self.rng.random() >= self.config.p_cx:
            return tuple(a), tuple(b)
        cut = int(self.rng.integers(1, self.k))
        return one_point_crossover(a, b, cut)


def one_point_crossover(a, b, cut: int) -> tuple:
    return tuple(a[:cut]) + tuple(b[cut:]), tuple(b[:cut]) + tuple(a[cut:])


def initialize_population(case: FailureCase, config: NsgaConfig, evaluator, variation: Variation) -> list:
    factual = tuple(case.factual_actions)
    population = [Candidate.evaluated(factual, evaluator)]
    while len(population) < config.population:
        population.append(Candidate.evaluated(variation.mutate(factual), evaluator))
    return population


def tournament(parents: list, size: int, rng: np.random.Generator) -> Candidate:
    picks = rng.choice(len(parents), size=size, replace=False)
    best = parents[int(picks[0])]
    for i in picks[1:]:
        c = parents[int(i)]
        if (c.rank, -c.crowding) < (best.rank, -best.crowding):
            best = c
    return best


def make_children(parents: list, config: NsgaConfig, evaluator, variation: Variation) -> list:
    rng = variation.rng
    size = min(config.tournament, len(parents))
    children = []
    while len(children) < config.population:
        p1 = tournament(parents, size, rng)
        p2 = tournament(parents, size, rng)
        for child in variation.crossover(p1.actions, p2.actions):
            children.append(Candidate.evaluated(variation.mutate(child), evaluator))
    return children[: config.population]


def select_survivors(combined: list, n: int) -> list:
    fronts = assign_rank_and_crowding(combined)
    survivors = []
    for idx in fronts:
        front = [combined[i] for i in idx]
        if len(survivors) + len(front) <= n:
            survivors.extend(front)
            if len(survivors) == n:
                break
            continue
        order = sorted(range(len(front)), key=lambda i: -front[i].crowding)
        survivors.extend(front[i] for i in order[: n - len(survivors)])
        break
    return survivors


def pareto_feasible(population: list) -> list:
    """Feasible first-front members, deduplicated by action sequence in population order."""
    fronts = fast_nondominated_sort(population)
    if not fronts:
        return []
    seen, out = set(), []
    for i in sorted(fronts[0]):
        c = population[i]
        if c.feasible and c.actions not in seen:
            seen.add(c.actions)
            out.append(c)
    return out


def evolve(env: Environment, case: FailureCase, config: NsgaConfig, samples: int = DEFAULT_SAMPLES,
           eps: float | None = None, mc_seed: int = 0, terminal_only: bool = False,
           history: list | None = None) -> ExplanationSet:
    """Search for diverse valid counterfactuals of one failure case.

    ``history``, if given, receives a copy of each generation's parent population.
    """
    t0 = time.perf_counter()
    rng = make_rng(config.seed)
    evaluator = CaseEvaluator(env, case, samples, eps, mc_seed, terminal_only)
    variation = Variation(env, case, config, rng)

    parents = initialize_population(case, config, evaluator, variation)
    assign_rank_and_crowding(parents)
    if history is not None:
        history.append(list(parents))
    children = make_children(parents, config, evaluator, variation)
    for g in range(config.generations):
        parents = select_survivors(parents + children, config.population)
        if history is not None:
            history.append(list(parents))
        if g + 1 < config.generations:
            children = make_children(parents, config, evaluator, variation)

    members = [Counterfactual(c.actions, c.properties) for c in pareto_feasible(parents)]
    ever_feasible = any(p.validity for p in evaluator.cache.values())
    return ExplanationSet(case.case_id, METHOD, members, {
        "population": config.population,
        "generations": config.generations,
        "seed": config.seed,
        "mc_seed": mc_seed,
        "samples": samples,
        "evaluated_sequences": len(evaluator.cache),
        "feasible_found": ever_feasible,
        "wall_time_s": round(time.perf_counter() - t0, 4),
    })
