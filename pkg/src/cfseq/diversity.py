"""Set-level diversity metrics over explanation sets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core import ActionSpace, InputError


@dataclass(frozen=True)
class DiversityReport:
    coverage: float
    action_diversity: float
    cf_property_diversity: float
    failures_evaluated: int


def _require_sets(sets) -> list:
    sets = list(sets)
    if not sets:
        raise InputError("need at least one explanation set")
    return sets


def coverage(sets) -> float:
    """Mean number of counterfactuals per failure, empty sets included."""
    sets = _require_sets(sets)
    return sum(len(s.members) for s in sets) / len(sets)


def sequence_distance(a, b, space: ActionSpace) -> float:
    if len(a) != len(b):
        raise InputError("sequences must share one length")
    k = len(a)
    if space.is_discrete:
        return sum(x != y for x, y in zip(a, b)) / k
    return float(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)).sum() / k)


def _mean_pairwise(items, dist) -> float:
    # fsum keeps the result independent of member order.
    pairs = list(combinations(items, 2))
    if not pairs:
        return 0.0
    return math.fsum(dist(x, y) for x, y in pairs) / len(pairs)


def action_diversity(sets, space: ActionSpace, k: int | None = None) -> float:
    sets = _require_sets(sets)
    lengths = {len(m.actions) for s in sets for m in s.members}
    if k is not None and lengths - {k}:
        raise InputError(f"sequences of length {sorted(lengths)} but k = {k}")
    per_failure = []
    for s in sets:
        seqs = [m.actions for m in s.members]
        if len({len(q) for q in seqs}) > 1:
            raise InputError("mixed-length sequences in one explanation set")
        per_failure.append(_mean_pairwise(seqs, lambda x, y: sequence_distance(x, y, space)))
    return math.fsum(per_failure) / len(per_failure)


def property_point(member) -> tuple:
    """The four objective properties on a common [0, 1] scale."""
    p = member.properties
    if p is None:
        raise InputError("counterfactual lacks a property vector")
    k = len(member.actions)
    return (p.proximity, p.sparsity / k, 1.0 - p.stochastic_certainty, p.recency)


def cf_property_diversity(sets) -> float:
    sets = _require_sets(sets)

    def dist(x, y):
        return sum((a - b) ** 2 for a, b in zip(x, y))

    per_failure = [_mean_pairwise([property_point(m) for m in s.members], dist) for s in sets]
    return math.fsum(per_failure) / len(per_failure)


def diversity_report(sets, space: ActionSpace) -> DiversityReport:
    sets = _require_sets(sets)
    return DiversityReport(coverage(sets), action_diversity(sets, space), cf_property_diversity(sets), len(sets))
