"""Proportional-representation audits for approval committees.

Given an election and a committee, these checkers search exhaustively
for a violating cohesive group.  A committee fails the strength-alpha
extended check when for some level L a set T of L candidates is
commonly approved by at least alpha * L * n/k voters who all hold fewer
than L committee members on their ballots; the proportional variant
instead requires the counted voters' committee intersections to fit
inside a common set of at most L-1 members.  Threshold comparisons are
exact (integer group size against a rational threshold), searches are
depth-first over candidate prefixes with support pruning on voter
bitmasks, and the first witness found is the canonical one: smallest
level, then lexicographic candidate set (then lexicographic excluded
set for the proportional variant).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from .core import Committee, Election


class AuditBudgetError(ValueError):
    """The exhaustive search space exceeds the allowed node budget."""

    def __init__(self, work: int, budget: int):
        super().__init__(
            f"audit would explore up to {work} candidate sets, over the "
            f"budget of {budget}; raise the budget explicitly to proceed"
        )
        self.work = work
        self.budget = budget


@dataclass(frozen=True)
class AuditWitness:
    """A violating cohesive group: its level, common candidates, voters."""

    level: int
    candidates: tuple[int, ...]
    voters: tuple[int, ...]
    excluded: tuple[int, ...] | None = None


@dataclass(frozen=True)
class AuditReport:
    axiom: str
    alpha: Fraction
    satisfied: bool
    witness: AuditWitness | None

    def __bool__(self) -> bool:
        return self.satisfied


def _candidate_masks(election: Election) -> list[int]:
    """masks[t-1] has bit v-1 set iff voter v approves arrival t."""
    masks = [0] * election.m
    for t, voters in enumerate(election.approvals):
        mask = 0
        for v in voters:
            mask |= 1 << (v - 1)
        masks[t] = mask
    return masks


def _mask_voters(mask: int) -> tuple[int, ...]:
    voters = []
    v = 1
    while mask:
        if mask & 1:
            voters.append(v)
        mask >>= 1
        v += 1
    return tuple(voters)


def _committee_intersections(
    election: Election, committee: frozenset[int]
) -> list[int]:
    counts = [0] * (election.n + 1)
    for t in committee:
        for v in election.approvals[t - 1]:
            counts[v] += 1
    return counts


def _check_committee(election: Election, committee: Committee) -> frozenset[int]:
    committee = frozenset(committee)
    if len(committee) != election.k:
        raise ValueError(
            f"committee has {len(committee)} members, election wants {election.k}"
        )
    for t in committee:
        if not 1 <= t <= election.m:
            raise ValueError(f"committee member {t} out of range 1..{election.m}")
    return committee


def check_ejr(
    election: Election,
    committee: Committee,
    alpha: Fraction | int = 1,
    budget: int = 2**24,
    _max_level: int | None = None,
) -> AuditReport:
    """Extended justified representation at strength alpha.

    Satisfied unless some level-L cohesive group of at least
    alpha * L * n/k voters is left with fewer than L approved committee
    members each.
    """
    committee = _check_committee(election, committee)
    alpha = Fraction(alpha)
    m, n, k = election.m, election.n, election.k
    top = k if _max_level is None else min(_max_level, k)
    work = sum(math.comb(m, level) for level in range(1, top + 1))
    if work > budget:
        raise AuditBudgetError(work, budget)

    masks = _candidate_masks(election)
    reps = _committee_intersections(election, committee)
    axiom = "ejr" if _max_level is None else "jr"
    for level in range(1, top + 1):
        threshold = alpha * level * Fraction(n, k)
        eligible = 0
        for v in range(1, n + 1):
            if reps[v] < level:
                eligible |= 1 << (v - 1)
        witness = _find_cohesive(masks, m, eligible, level, threshold)
        if witness is not None:
            chosen, support = witness
            return AuditReport(
                axiom,
                alpha,
                False,
                AuditWitness(level, chosen, _mask_voters(support)),
            )
    return AuditReport(axiom, alpha, True, None)


def _find_cohesive(
    masks: list[int],
    m: int,
    eligible: int,
    level: int,
    threshold: Fraction,
) -> tuple[tuple[int, ...], int] | None:
    """Lexicographically first level-sized T whose common approvers among
    ``eligible`` number at least ``threshold``; returns (T, support mask)."""
    if eligible.bit_count() < threshold:
        return None

    def descend(
        start: int, chosen: tuple[int, ...], support: int
    ) -> tuple[tuple[int, ...], int] | None:
        if len(chosen) == level:
            return chosen, support
        # keep enough room for the remaining picks
        for c in range(start, m - (level - len(chosen)) + 2):
            narrowed = support & masks[c - 1]
            if narrowed.bit_count() >= threshold:
                found = descend(c + 1, chosen + (c,), narrowed)
                if found is not None:
                    return found
        return None

    return descend(1, (), eligible)


def check_jr(
    election: Election, committee: Committee, budget: int = 2**24
) -> AuditReport:
    """Justified representation: the level-1, strength-1 special case."""
    return check_ejr(election, committee, alpha=1, budget=budget, _max_level=1)


def check_pjr(
    election: Election,
    committee: Committee,
    alpha: Fraction | int = 1,
    budget: int = 50_000_000,
) -> AuditReport:
    """Proportional justified representation at strength alpha.

    Satisfied unless some level-L cohesive group of at least
    alpha * L * n/k voters collectively holds fewer than L committee
    members: every counted voter's committee intersection fits inside
    one common set of at most L-1 members.
    """
    committee = _check_committee(election, committee)
    alpha = Fraction(alpha)
    m, n, k = election.m, election.n, election.k
    work = sum(
        math.comb(m, level) * math.comb(k, level - 1)
        for level in range(1, k + 1)
    )
    if work > budget:
        raise AuditBudgetError(work, budget)

    masks = _candidate_masks(election)
    members = sorted(committee)
    member_index = {t: i for i, t in enumerate(members)}
    # per-voter committee intersection as a bitmask over sorted members
    wballots = [0] * (election.n + 1)
    for t in committee:
        bit = 1 << member_index[t]
        for v in election.approvals[t - 1]:
            wballots[v] |= bit

    for level in range(1, k + 1):
        threshold = alpha * level * Fraction(n, k)
        loose = 0
        for v in range(1, n + 1):
            if wballots[v].bit_count() <= level - 1:
                loose |= 1 << (v - 1)
        hit = _find_pjr_witness(
            masks, m, loose, level, threshold, members, wballots
        )
        if hit is not None:
            chosen, voters, excluded = hit
            return AuditReport(
                "pjr",
                alpha,
                False,
                AuditWitness(level, chosen, voters, excluded),
            )
    return AuditReport("pjr", alpha, True, None)


def _find_pjr_witness(
    masks: list[int],
    m: int,
    loose: int,
    level: int,
    threshold: Fraction,
    members: list[int],
    wballots: list[int],
) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]] | None:
    if loose.bit_count() < threshold:
        return None

    def inspect(
        chosen: tuple[int, ...], support: int
    ) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]] | None:
        supporters = _mask_voters(support)
        for excluded in combinations(range(len(members)), level - 1):
            allowed = 0
            for i in excluded:
                allowed |= 1 << i
            group = tuple(
                v for v in supporters if wballots[v] & ~allowed == 0
            )
            if len(group) >= threshold:
                return (
                    chosen,
                    group,
                    tuple(members[i] for i in excluded),
                )
        return None

    def descend(
        start: int, chosen: tuple[int, ...], support: int
    ) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]] | None:
        if len(chosen) == level:
            return inspect(chosen, support)
        for c in range(start, m - (level - len(chosen)) + 2):
            narrowed = support & masks[c - 1]
            if narrowed.bit_count() >= threshold:
                found = descend(c + 1, chosen + (c,), narrowed)
                if found is not None:
                    return found
        return None

    return descend(1, (), loose)
