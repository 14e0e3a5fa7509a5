"""Prior-free partition policy with observation windows.

The arrival stream is split into k contiguous parts, one committee seat
per part.  Inside each part the policy watches an initial observation
window, sets the acceptance threshold to the best marginal gain seen
there (never below zero), then takes the first later candidate whose
marginal gain meets it, falling back to the part's last arrival.  This
guarantees a constant fraction of the offline optimum in expectation
over random arrival orders for submodular scoring, with no knowledge of
the approval distribution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .core import Committee, ReplayState
from .thiele import ThieleFunction

# Rational bounds on e, far tighter than any realistic stream length needs.
_E_LO = Fraction("2.718281828459045235360287471352662497757")
_E_HI = Fraction("2.718281828459045235360287471352662497758")


def observation_length(m: int, k: int) -> int:
    """ceil(m / (k*e)) computed exactly from rational bounds on e."""
    lo = math.ceil(Fraction(m, k) / _E_HI)
    hi = math.ceil(Fraction(m, k) / _E_LO)
    if lo != hi:  # would need m/(k*e) within ~1e-39 of an integer
        raise ValueError(
            f"cannot resolve ceil(m/(k*e)) for m={m}, k={k}; widen the e bounds"
        )
    return lo


@dataclass(frozen=True)
class PartitionPlan:
    """Contiguous arrival parts with per-part observation windows."""

    m: int
    k: int
    parts: tuple[tuple[int, int], ...]  # inclusive (start, end) positions
    windows: tuple[int, ...]  # observation lengths, one per part

    def part_of(self, t: int) -> int:
        """0-based part index of arrival position t."""
        for idx, (start, end) in enumerate(self.parts):
            if start <= t <= end:
                return idx
        raise ValueError(f"arrival position {t} outside 1..{self.m}")


def make_partition(m: int, k: int) -> PartitionPlan:
    """Split positions 1..m into k contiguous parts of near-equal size.

    The first m mod k parts take ceil(m/k) positions, the rest take
    floor(m/k).  Each part's observation window is ceil(m/(k*e)),
    capped so at least the part's last arrival stays selectable.
    """
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= m, got k={k}, m={m}")
    big, rem = divmod(m, k)
    sizes = [big + 1] * rem + [big] * (k - rem)
    cutoff = observation_length(m, k)
    parts: list[tuple[int, int]] = []
    windows: list[int] = []
    start = 1
    for size in sizes:
        parts.append((start, start + size - 1))
        windows.append(min(cutoff, size - 1))
        start += size
    return PartitionPlan(m, k, tuple(parts), tuple(windows))


class SecretaryPolicy:
    """One pick per part: observe, set a threshold, take the first match.

    Marginal gains are computed against the candidates this policy has
    accepted so far, using exact arithmetic (weights are scaled to a
    common integer denominator).  The threshold is the maximum window
    gain, floored at zero; acceptance uses >= so a zero threshold still
    lets the first post-window candidate through.
    """

    def __init__(self, f: ThieleFunction):
        self._f = f
        self._plan: PartitionPlan | None = None
        self._weights: list[int] = []
        self._counts: list[int] = []
        self._k = 0
        self._part = -1
        self._best = 0
        self._picked = False

    def begin(self, m: int, n: int, k: int) -> None:
        self._plan = make_partition(m, k)
        self._k = k
        denom = math.lcm(
            *(self._f.marginal(j).denominator for j in range(1, k + 1))
        )
        self._weights = [
            int(self._f.marginal(v + 1) * denom) for v in range(k)
        ] + [0]
        self._counts = [0] * n
        self._part = -1
        self._best = 0
        self._picked = False

    def _gain(self, approvers: Committee) -> int:
        return sum(self._weights[self._counts[v - 1]] for v in approvers)

    def decide(self, state: ReplayState, approvers: Committee) -> bool:
        plan = self._plan
        assert plan is not None, "decide called before begin"
        part = plan.part_of(state.t)
        if part != self._part:
            self._part = part
            self._best = 0
            self._picked = False
        start, end = plan.parts[part]
        gain = self._gain(approvers)
        if state.t - start < plan.windows[part]:
            self._best = max(self._best, gain)
            return False
        accept = not self._picked and (gain >= self._best or state.t == end)
        if accept:
            self._picked = True
            for v in approvers:
                self._counts[v - 1] = min(self._counts[v - 1] + 1, self._k)
        return accept
