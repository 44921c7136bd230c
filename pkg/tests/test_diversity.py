import random

import pytest
from hypothesis import given, settings, strategies as st

from cfseq.core import ActionSpace, InputError
from cfseq.diversity import (
    action_diversity,
    cf_property_diversity,
    coverage,
    diversity_report,
    property_point,
)
from cfseq.explanation import Counterfactual, ExplanationSet
from cfseq.properties import PropertyVector

D5 = ActionSpace.discrete(5)


def member(actions, proximity=0.2, sparsity=1, certainty=1.0, recency=0.1):
    return Counterfactual(tuple(actions), PropertyVector(1, proximity, sparsity, certainty, recency))


def eset(members, case="c"):
    return ExplanationSet(case, "M", list(members))


def test_coverage_counts_empty_sets():
    sets = [eset([member((0,)), member((1,))]), eset([]), eset([member((2,))])]
    assert coverage(sets) == 1.0


def test_singletons():
    sets = [eset([member((i, 0))]) for i in range(4)]
    assert coverage(sets) == 1.0
    assert action_diversity(sets, D5) == 0.0
    assert cf_property_diversity(sets) == 0.0


def test_one_position_apart():
    s = eset([member((0, 1, 2, 3, 4)), member((0, 1, 2, 3, 0))])
    assert action_diversity([s], D5) == 0.2


def test_duplicates_have_zero_distance():
    s = eset([member((0, 1, 2, 3, 4)), member((0, 1, 2, 3, 4))])
    assert action_diversity([s], D5) == 0.0


def test_property_gap():
    s = eset([member((0, 1), proximity=0.2), member((1, 1), proximity=0.4)])
    assert cf_property_diversity([s]) == pytest.approx(0.04, abs=1e-15)


def test_identical_properties():
    s = eset([member((0, 1)), member((1, 1))])
    assert cf_property_diversity([s]) == 0.0


def test_sparsity_is_scaled_by_length():
    s = eset([member((0, 0, 0, 0), sparsity=1), member((1, 1, 0, 0), sparsity=3)])
    assert cf_property_diversity([s]) == pytest.approx((2 / 4) ** 2)


def test_pairs_are_averaged_not_summed():
    s = eset([member((0, 0)), member((1, 0)), member((1, 1))])
    # distances 0.5, 1.0, 0.5 over three pairs
    assert action_diversity([s], ActionSpace.discrete(2)) == pytest.approx(2 / 3)


def test_continuous_distance():
    space = ActionSpace.continuous([-1.0], [1.0])
    s = eset([member([(0.0,), (0.5,)]), member([(0.5,), (0.5,)])])
    assert action_diversity([s], space) == 0.25


def test_errors():
    with pytest.raises(InputError):
        coverage([])
    with pytest.raises(InputError):
        action_diversity([eset([member((0, 1)), member((0,))])], D5)
    with pytest.raises(InputError):
        cf_property_diversity([eset([Counterfactual((0,), None), member((1,))])])


def test_report_counts_failures():
    r = diversity_report([eset([member((0,))]), eset([])], ActionSpace.discrete(2))
    assert r.failures_evaluated == 2 and r.coverage == 0.5


unit = st.floats(0, 1)
members_st = st.lists(
    st.tuples(st.lists(st.integers(0, 4), min_size=5, max_size=5), unit, st.integers(0, 5), unit, unit),
    max_size=6)


@settings(max_examples=150, deadline=None)
@given(raw=st.lists(members_st, min_size=1, max_size=6), seed=st.integers(0, 1000))
def test_permutation_invariance(raw, seed):
    sets = [eset([member(a, p, s, c, r) for a, p, s, c, r in ms], f"c{i}") for i, ms in enumerate(raw)]
    rng = random.Random(seed)
    shuffled = [eset(rng.sample(s.members, len(s.members)), s.case_id) for s in sets]
    rng.shuffle(shuffled)
    assert coverage(shuffled) == coverage(sets)
    assert action_diversity(shuffled, D5) == action_diversity(sets, D5)
    assert cf_property_diversity(shuffled) == cf_property_diversity(sets)


def test_duplicate_of_an_outlier_raises_the_pair_average():
    # Pair-averaged diversity is not monotone under duplication: repeating the
    # far member adds more far pairs than near ones.
    near = [member((0, 0, 0, 0, 0), proximity=p) for p in (0.0, 0.01, 0.02)]
    far = member((1, 1, 1, 1, 1), proximity=1.0)
    before, after = eset(near + [far]), eset(near + [far, far])
    assert action_diversity([after], D5) > action_diversity([before], D5)
    assert cf_property_diversity([after]) > cf_property_diversity([before])


def hamming(u, v):
    return sum(a != b for a, b in zip(u.actions, v.actions)) / len(u.actions)


def squared_property_gap(u, v):
    return sum((a - b) ** 2 for a, b in zip(property_point(u), property_point(v)))


@settings(max_examples=150, deadline=None)
@given(ms=members_st.filter(lambda m: len(m) >= 2), pick=st.integers(0, 5))
def test_duplicate_raises_diversity_exactly_when_member_is_far(ms, pick):
    # Duplicating x in a set of n members with mean pairwise distance m moves
    # the mean up iff S_x / n > m, where S_x sums distances from x to the set.
    members = [member(a, p, s, c, r) for a, p, s, c, r in ms]
    x = members[pick % len(members)]
    n = len(members)
    metrics = ((lambda sets: action_diversity(sets, D5), hamming),
               (cf_property_diversity, squared_property_gap))
    for metric, dist in metrics:
        before = metric([eset(members)])
        after = metric([eset(members + [x])])
        pull = sum(dist(x, y) for y in members) / n
        if pull < before - 1e-9:
            assert after < before
        elif pull > before + 1e-9:
            assert after > before
