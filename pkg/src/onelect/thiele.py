"""Thiele-style committee scoring.

A scoring function is given by nonnegative marginal weights w_1, w_2,
...: a voter whose ballot intersects the committee in r candidates
contributes w_1 + ... + w_r to the committee's score.  All arithmetic
on scores is exact (fractions; the enumeration fast path uses scaled
integers).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .core import Committee, Election


class EnumerationBudgetError(ValueError):
    """Offline enumeration would exceed the allowed committee count."""

    def __init__(self, count: int, budget: int):
        super().__init__(
            f"enumerating {count} committees exceeds the budget of {budget}; "
            "raise the budget explicitly to proceed"
        )
        self.count = count
        self.budget = budget


@dataclass(frozen=True)
class ThieleFunction:
    """Marginal-weight representation of a committee scoring function."""

    name: str
    marginals: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        for w in self.marginals:
            if w < 0:
                raise ValueError(f"marginal weights must be nonnegative, got {w}")

    @cached_property
    def values(self) -> tuple[Fraction, ...]:
        """Cumulative values f(0), f(1), ... f(len(marginals))."""
        return (Fraction(0), *itertools.accumulate(self.marginals))

    @property
    def saturation(self) -> int:
        """Largest j with w_j > 0 (0 if all weights vanish).

        Intersections beyond this depth add nothing, so state-space
        constructions may cap per-voter counts here.
        """
        for j in range(len(self.marginals), 0, -1):
            if self.marginals[j - 1] != 0:
                return j
        return 0

    def value(self, r: int) -> Fraction:
        """f(r): the worth of r committee members on one ballot."""
        if r < 0:
            raise ValueError(f"intersection size must be nonnegative, got {r}")
        return self.values[min(r, len(self.marginals))]

    def marginal(self, j: int) -> Fraction:
        """w_j = f(j) - f(j-1) for 1-based j (0 beyond the stored weights)."""
        if j < 1:
            raise ValueError(f"marginal index must be >= 1, got {j}")
        return self.marginals[j - 1] if j <= len(self.marginals) else Fraction(0)

    def is_submodular(self) -> bool:
        """True when marginal weights never increase (diminishing returns)."""
        return all(
            self.marginals[j] <= self.marginals[j - 1]
            for j in range(1, len(self.marginals))
        )

    @classmethod
    def mav(cls, k: int) -> "ThieleFunction":
        """Multiwinner approval voting: every intersection member counts."""
        return cls("mav", (Fraction(1),) * k)

    @classmethod
    def pav(cls, k: int) -> "ThieleFunction":
        """Proportional approval voting: harmonic marginals 1, 1/2, ..., 1/k."""
        return cls("pav", tuple(Fraction(1, j) for j in range(1, k + 1)))

    @classmethod
    def cc(cls, k: int) -> "ThieleFunction":
        """Chamberlin-Courant: only the first representative counts."""
        return cls("cc", (Fraction(1),) + (Fraction(0),) * (k - 1))

    @classmethod
    def truncated_pav(cls, k: int) -> "ThieleFunction":
        """Harmonic weights cut off after depth 2 (1, 1/2, 0, ..., 0)."""
        head = (Fraction(1), Fraction(1, 2))[:k]
        return cls("tpav", head + (Fraction(0),) * (k - len(head)))

    @classmethod
    def from_weights(
        cls, weights: Iterable[Fraction | int | str], name: str = "vec"
    ) -> "ThieleFunction":
        return cls(name, tuple(Fraction(w) for w in weights))


def resolve_thiele(spec: str, k: int) -> ThieleFunction:
    """Turn a textual scoring spec into a ThieleFunction for committees of size k.

    Accepted forms: ``mav``, ``pav``, ``cc``, and ``vec:w1,w2,...`` with
    exact rational weights (``1/3`` or decimal strings, parsed exactly).
    """
    spec = spec.strip()
    if spec == "mav":
        return ThieleFunction.mav(k)
    if spec == "pav":
        return ThieleFunction.pav(k)
    if spec == "cc":
        return ThieleFunction.cc(k)
    if spec.startswith("vec:"):
        body = spec[len("vec:"):]
        try:
            weights = tuple(Fraction(part.strip()) for part in body.split(","))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"bad weight vector {body!r}: {exc}") from None
        if len(weights) > k:
            raise ValueError(
                f"weight vector has {len(weights)} entries but committees "
                f"have only {k} seats"
            )
        padded = weights + (Fraction(0),) * (k - len(weights))
        return ThieleFunction.from_weights(padded)
    raise ValueError(
        f"unknown scoring spec {spec!r}; expected mav, pav, cc or vec:w1,w2,..."
    )


def intersection_counts(election: Election, committee: Iterable[int]) -> list[int]:
    """Per-voter |ballot ∩ committee|, indexed by voter id - 1."""
    counts = [0] * election.n
    for t in committee:
        for v in election.approvals[t - 1]:
            counts[v - 1] += 1
    return counts


def score(
    election: Election, f: ThieleFunction, committee: Iterable[int]
) -> Fraction:
    """Exact committee score under f."""
    return sum(
        (f.value(r) for r in intersection_counts(election, committee)),
        Fraction(0),
    )


def marginal_gain(
    election: Election, f: ThieleFunction, committee: Iterable[int], candidate: int
) -> Fraction:
    """Score increase from adding ``candidate`` to ``committee``."""
    counts = intersection_counts(election, committee)
    return sum(
        (f.marginal(counts[v - 1] + 1) for v in election.approvals[candidate - 1]),
        Fraction(0),
    )


def _scaled_weight_table(f: ThieleFunction, k: int) -> tuple[list[int], int]:
    """Cumulative values f(0..k) as integers over a common denominator."""
    values = [f.value(r) for r in range(k + 1)]
    denom = math.lcm(*(v.denominator for v in values)) if values else 1
    return [int(v * denom) for v in values], denom


def offline_optimum(
    election: Election,
    f: ThieleFunction,
    budget: int = 10_000_000,
) -> tuple[Committee, Fraction]:
    """Best committee in hindsight by exhaustive enumeration.

    Returns the lexicographically first maximizer (by sorted candidate
    positions) and its exact score.  Scoring is exact throughout: the
    vectorized path works on common-denominator integer weights and
    falls back to pure fractions if those would overflow int64.
    """
    m, n, k = election.m, election.n, election.k
    count = math.comb(m, k)
    if count > budget:
        raise EnumerationBudgetError(count, budget)

    table, denom = _scaled_weight_table(f, k)
    if n * max(table) < 2**62:
        combo, scaled = _optimum_vectorized(election, table)
        return combo, Fraction(scaled, denom)
    best: tuple[Fraction, Committee] | None = None
    for combo in itertools.combinations(range(1, m + 1), k):
        s = score(election, f, combo)
        if best is None or s > best[0]:
            best = (s, frozenset(combo))
    assert best is not None
    return best[1], best[0]


def _optimum_vectorized(
    election: Election, table: Sequence[int], batch: int = 4096
) -> tuple[Committee, int]:
    m, n, k = election.m, election.n, election.k
    approval = np.zeros((n, m), dtype=np.uint8)
    for t, voters in enumerate(election.approvals):
        for v in voters:
            approval[v - 1, t] = 1
    weights = np.asarray(table, dtype=np.int64)

    best_score = -1
    best_combo: tuple[int, ...] | None = None
    combos = itertools.combinations(range(m), k)
    while True:
        block = list(itertools.islice(combos, batch))
        if not block:
            break
        idx = np.asarray(block, dtype=np.intp)
        counts = approval[:, idx].sum(axis=2, dtype=np.int64)
        scores = weights[counts].sum(axis=0)
        local = int(np.argmax(scores))
        if scores[local] > best_score:
            best_score = int(scores[local])
            best_combo = block[local]
    assert best_combo is not None
    return frozenset(t + 1 for t in best_combo), best_score
