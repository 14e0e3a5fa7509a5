"""Election model, text format, and replay harness."""
from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onelect import (
    FORCED_FULL,
    FORCED_TIGHT,
    AcceptAll,
    Election,
    ElectionFormatError,
    FixedDecisions,
    RejectAll,
    parse_election,
    replay,
    serialize_election,
)

from conftest import random_election


class ConsultationCounter:
    """Accepts everything while counting how often it is consulted."""

    def __init__(self) -> None:
        self.calls = 0

    def begin(self, m: int, n: int, k: int) -> None:
        self.calls = 0

    def decide(self, state, approvers) -> bool:
        self.calls += 1
        return True


def test_parse_basic() -> None:
    e = parse_election("3 4 2\n1 2\n-\n2 4\n")
    assert (e.m, e.n, e.k) == (3, 4, 2)
    assert e.approvals == (frozenset({1, 2}), frozenset(), frozenset({2, 4}))


def test_parse_comments_blank_suffix_and_unsorted_ids() -> None:
    text = "# season 7\n4 3 2\n# first arrival\n2 1\n-\n3\n1 3\n"
    e = parse_election(text)
    assert e.approvers(1) == frozenset({1, 2})
    assert e.approvers(4) == frozenset({1, 3})
    assert serialize_election(e) == "4 3 2\n1 2\n-\n3\n1 3\n"


def test_serialize_round_trip() -> None:
    e = Election.from_approvals(3, 4, 2, [{2, 1}, set(), {4, 2}])
    assert parse_election(serialize_election(e)) == e


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("3 4\n1\n", 1, "header"),
        ("a b c\n", 1, "three integers"),
        ("0 3 1\n", 1, "m >= 1"),
        ("2 3 3\n1\n2\n", 1, "k <= m"),
        ("2 3 1\n1\n\n2\n", 3, "blank line"),
        ("2 3 1\n1 x\n2\n", 2, "voter ids"),
        ("2 3 1\n1 4\n2\n", 2, "out of range"),
        ("2 3 1\n1 0\n2\n", 2, "out of range"),
        ("# note\n2 3 1\n1 2 2\n3\n", 3, "duplicate voter id 2"),
        ("2 3 1\n1\n2\n3\n", 4, "extra content"),
        ("3 3 1\n1\n2\n", 3, "expected 3 approval lines"),
        ("", None, "missing"),
        ("# only a comment\n", None, "missing"),
    ],
)
def test_parse_errors_carry_physical_line_numbers(text, line, fragment) -> None:
    with pytest.raises(ElectionFormatError) as exc_info:
        parse_election(text)
    assert exc_info.value.line == line
    assert fragment in str(exc_info.value)


def test_election_validation() -> None:
    with pytest.raises(ValueError, match="k <= m"):
        Election.from_approvals(2, 3, 3, [{1}, {2}])
    with pytest.raises(ValueError, match="voter id 5 out of range"):
        Election.from_approvals(2, 3, 1, [{1}, {5}])
    with pytest.raises(ValueError, match="expected 2 approval sets"):
        Election(2, 3, 1, (frozenset({1}),))
    with pytest.raises(ValueError, match="at least one voter"):
        Election.from_approvals(1, 0, 1, [set()])


def test_ballot_views_are_consistent() -> None:
    e = Election.from_approvals(4, 3, 2, [{1, 2}, {1, 2}, {1}, {2}])
    assert e.ballot(1) == frozenset({1, 2, 3})
    assert e.ballot(3) == frozenset()
    assert e.ballots() == tuple(e.ballot(v) for v in range(1, e.n + 1))
    for t in range(1, e.m + 1):
        for v in range(1, e.n + 1):
            assert (v in e.approvers(t)) == (t in e.ballot(v))
    with pytest.raises(ValueError):
        e.approvers(0)
    with pytest.raises(ValueError):
        e.ballot(4)


def test_replay_full_override() -> None:
    e = Election.from_approvals(3, 2, 2, [{1}, {2}, {1, 2}])
    result = replay(e, AcceptAll())
    assert result.committee == frozenset({1, 2})
    assert result.decisions == (True, True, False)
    assert result.forced == (None, None, FORCED_FULL)
    assert result.forced_count == 1


def test_replay_tight_override() -> None:
    e = Election.from_approvals(3, 2, 2, [{1}, {2}, {1, 2}])
    result = replay(e, RejectAll())
    assert result.committee == frozenset({2, 3})
    assert result.decisions == (False, True, True)
    assert result.forced == (None, FORCED_TIGHT, FORCED_TIGHT)


def test_replay_skips_policy_on_forced_arrivals() -> None:
    e = Election.from_approvals(5, 2, 2, [set()] * 5)
    policy = ConsultationCounter()
    result = replay(e, policy)
    # consulted at t=1,2 only: the committee is full from t=3 on
    assert policy.calls == 2
    assert result.committee == frozenset({1, 2})
    assert result.forced == (None, None, FORCED_FULL, FORCED_FULL, FORCED_FULL)


def test_replay_state_hides_the_future() -> None:
    seen: list[tuple[int, int, tuple[bool, ...]]] = []

    class Recorder:
        def begin(self, m, n, k):
            pass

        def decide(self, state, approvers):
            seen.append((state.t, len(state.selected), state.decisions))
            assert len(state.decisions) == state.t - 1
            assert state.remaining == state.m - state.t + 1
            assert all(c < state.t for c in state.selected)
            return state.t % 2 == 0

    e = Election.from_approvals(6, 2, 3, [{1}, {2}, set(), {1, 2}, {1}, {2}])
    replay(e, Recorder())
    assert [t for t, _, _ in seen] == [1, 2, 3, 4, 5]


def test_fixed_decisions_validates_length() -> None:
    e = Election.from_approvals(3, 2, 1, [{1}, {2}, set()])
    with pytest.raises(ValueError, match="2 entries"):
        replay(e, FixedDecisions([True, False]))


@given(
    m=st.integers(1, 8),
    data=st.data(),
)
@settings(max_examples=120, deadline=None)
def test_replay_always_fills_exactly_k(m: int, data) -> None:
    k = data.draw(st.integers(1, m))
    wishes = data.draw(st.lists(st.booleans(), min_size=m, max_size=m))
    e = Election.from_approvals(m, 2, k, [set() for _ in range(m)])
    result = replay(e, FixedDecisions(wishes))
    assert len(result.committee) == k
    # overrides only ever flip the policy's wish, never invent members
    for t, (wish, got, why) in enumerate(
        zip(wishes, result.decisions, result.forced), start=1
    ):
        if why is None:
            assert got == wish
        elif why == FORCED_FULL:
            assert got is False
        else:
            assert why == FORCED_TIGHT and got is True
        assert (t in result.committee) == got


@given(
    m=st.integers(1, 7),
    n=st.integers(1, 6),
    data=st.data(),
)
@settings(max_examples=120, deadline=None)
def test_text_round_trip_property(m: int, n: int, data) -> None:
    k = data.draw(st.integers(1, m))
    approvals = data.draw(
        st.lists(
            st.sets(st.integers(1, n)),
            min_size=m,
            max_size=m,
        )
    )
    e = Election.from_approvals(m, n, k, approvals)
    text = serialize_election(e)
    assert parse_election(text) == e
    # canonical form is a fixed point
    assert serialize_election(parse_election(text)) == text


def test_random_election_helper_respects_dimensions() -> None:
    import random

    e = random_election(random.Random(7), 10, 5, 3, p=0.4)
    assert (e.m, e.n, e.k) == (10, 5, 3)
    assert all(v <= 5 for voters in e.approvals for v in voters)
