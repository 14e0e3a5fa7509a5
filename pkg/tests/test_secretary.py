"""Partition policy: windows, thresholds, fallbacks."""
from __future__ import annotations

import math
import random
from fractions import Fraction

import pytest

from onelect import (
    Election,
    SecretaryPolicy,
    ThieleFunction,
    make_partition,
    observation_length,
    replay,
)
from onelect.secretary import _E_HI, _E_LO

from conftest import random_election


def test_observation_length_matches_rational_ceiling() -> None:
    for m, k in [(4, 2), (24, 4), (10, 3), (1, 1), (1000, 7), (997, 13)]:
        length = observation_length(m, k)
        lo = math.ceil(Fraction(m, k) / _E_HI)
        hi = math.ceil(Fraction(m, k) / _E_LO)
        assert lo == hi == length
        # sanity against the float approximation
        assert abs(length - m / (k * math.e)) <= 1.0


def test_make_partition_even() -> None:
    plan = make_partition(24, 4)
    assert plan.parts == ((1, 6), (7, 12), (13, 18), (19, 24))
    assert plan.windows == (3, 3, 3, 3)


def test_make_partition_uneven_puts_big_parts_first() -> None:
    plan = make_partition(10, 3)
    assert plan.parts == ((1, 4), (5, 7), (8, 10))
    assert plan.windows == (2, 2, 2)


def test_make_partition_window_capped_to_leave_one_candidate() -> None:
    plan = make_partition(3, 3)
    assert plan.parts == ((1, 1), (2, 2), (3, 3))
    assert plan.windows == (0, 0, 0)


def test_part_of() -> None:
    plan = make_partition(10, 3)
    assert [plan.part_of(t) for t in range(1, 11)] == [
        0, 0, 0, 0, 1, 1, 1, 2, 2, 2,
    ]
    with pytest.raises(ValueError):
        plan.part_of(0)
    with pytest.raises(ValueError):
        plan.part_of(11)
    with pytest.raises(ValueError, match="1 <= k <= m"):
        make_partition(3, 4)


def test_all_zero_gains_accept_right_after_the_window() -> None:
    # a zero threshold plus >= acceptance takes the first post-window
    # arrival of each part
    e = Election.from_approvals(8, 2, 2, [set()] * 8)
    result = replay(e, SecretaryPolicy(ThieleFunction.mav(2)))
    assert result.committee == frozenset({3, 7})
    assert result.forced == (None, None, None, None, None, None, None, "full")


def test_threshold_equality_accepts() -> None:
    # window best is 2 and the first post-window gain is also 2
    e = Election.from_approvals(5, 2, 2, [{1, 2}, {1, 2}, set(), {1}, set()])
    plan = make_partition(5, 2)
    assert plan.parts == ((1, 3), (4, 5))
    assert plan.windows == (1, 1)
    result = replay(e, SecretaryPolicy(ThieleFunction.mav(2)))
    assert result.decisions[1] is True and result.forced[1] is None
    assert result.committee == frozenset({2, 5})


def test_fallback_takes_the_part_end_below_threshold() -> None:
    # window best 2, later gains below it: the part's last arrival is
    # taken by the policy itself (no feasibility override involved)
    e = Election.from_approvals(6, 2, 2, [{1, 2}, set(), {1}, set(), set(), set()])
    plan = make_partition(6, 2)
    assert plan.parts == ((1, 3), (4, 6))
    assert plan.windows == (2, 2)
    result = replay(e, SecretaryPolicy(ThieleFunction.mav(2)))
    assert result.decisions[2] is True
    assert result.forced[2] is None  # policy fallback, not an override
    assert 3 in result.committee


def test_weights_shape_the_threshold_comparison() -> None:
    # same stream, different scoring: the flat rule re-elects a covered
    # voter at the threshold, the harmonic rule holds out for the end
    approvals = [{1}, set(), {2}, set(), {3}, set(), {2}, set()]
    flat = replay(
        Election.from_approvals(8, 3, 2, approvals),
        SecretaryPolicy(ThieleFunction.mav(2)),
    )
    harmonic = replay(
        Election.from_approvals(8, 3, 2, approvals),
        SecretaryPolicy(ThieleFunction.pav(2)),
    )
    assert flat.committee == frozenset({3, 7})
    assert harmonic.committee == frozenset({3, 8})
    assert harmonic.forced[7] == "tight"


@pytest.mark.parametrize("seed", range(8))
def test_one_spontaneous_pick_per_part(seed: int) -> None:
    rng = random.Random(seed)
    m = rng.randint(4, 24)
    k = rng.randint(1, min(5, m))
    n = rng.randint(1, 6)
    e = random_election(rng, m, n, k, p=rng.choice([0.2, 0.5, 0.8]))
    plan = make_partition(m, k)
    result = replay(e, SecretaryPolicy(ThieleFunction.pav(k)))
    assert len(result.committee) == k
    for idx, (start, end) in enumerate(plan.parts):
        spontaneous = [
            t
            for t in range(start, end + 1)
            if result.decisions[t - 1] and result.forced[t - 1] is None
        ]
        assert len(spontaneous) <= 1
        # spontaneous picks never land inside the observation window
        for t in spontaneous:
            assert t - start >= plan.windows[idx]
