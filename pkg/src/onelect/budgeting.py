"""Budget-based online rules with proportionality guarantees.

Every policy here endows voters with virtual currency and accepts a
candidate exactly when its supporters can cover a seat price, which
yields worst-case representation guarantees without any prior:

* ``GreedyBudgetPolicy``: one dollar per voter, seat price n/k paid by
  water-filling — committees satisfy proportional justified
  representation.
* ``OgcaPolicy``: counts under-served approvers per cohesion level —
  committees satisfy extended justified representation up to a factor
  H(k).
* ``SgbrPolicy``: per-scale coin types with geometric support floors —
  committees satisfy extended justified representation up to a factor
  ceil(w(k))^2 where w(k)^w(k) = k.

All balances and prices are exact fractions.
"""
from __future__ import annotations

import math
from bisect import bisect_left
from fractions import Fraction

from .core import Committee, ReplayState


def harmonic(i: int) -> Fraction:
    """Exact i-th harmonic number 1 + 1/2 + ... + 1/i (0 for i=0)."""
    if i < 0:
        raise ValueError(f"harmonic index must be nonnegative, got {i}")
    if i == 0:
        return Fraction(0)

    def span(lo: int, hi: int) -> Fraction:
        if lo == hi:
            return Fraction(1, lo)
        mid = (lo + hi) // 2
        return span(lo, mid) + span(mid + 1, hi)

    return span(1, i)


def w_inverse(x: float, tol: float = 1e-9) -> float:
    """Solve y**y = x for y >= 1, to relative residual tol.

    The returned y satisfies abs(y**y - x) <= tol * x.
    """
    if x < 1:
        raise ValueError(f"need x >= 1, got {x}")
    if x == 1:
        return 1.0
    lo, hi = 1.0, 2.0
    while hi**hi < x:
        lo, hi = hi, hi * 2
    for _ in range(200):
        mid = (lo + hi) / 2
        value = mid**mid
        if abs(value - x) <= tol * x:
            return mid
        if value < x:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def ceil_w(k: int) -> int:
    """Smallest integer a >= 1 with a**a >= k (exact integer arithmetic)."""
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    a = 1
    while a**a < k:
        a += 1
    return a


def water_fill(
    balances: dict[int, Fraction], target: Fraction
) -> dict[int, Fraction]:
    """Payments min(b_i, level) with the smallest level summing to target.

    Voters poorer than the level pay their whole balance; the rest pay
    the common level.  Raises if the pool cannot cover the target.
    """
    if target < 0:
        raise ValueError(f"target must be nonnegative, got {target}")
    total = sum(balances.values(), Fraction(0))
    if total < target:
        raise ValueError(f"pool {total} cannot cover target {target}")
    items = sorted(balances.items(), key=lambda kv: (kv[1], kv[0]))
    payments: dict[int, Fraction] = {}
    remaining = Fraction(target)
    for idx, (voter, balance) in enumerate(items):
        level = remaining / (len(items) - idx)
        if balance <= level:
            payments[voter] = balance
            remaining -= balance
        else:
            for later_voter, _ in items[idx:]:
                payments[later_voter] = level
            break
    return payments


class GreedyBudgetPolicy:
    """Accept when supporters' pooled leftover budget covers one seat.

    Each voter starts with one dollar; a seat costs n/k, charged to the
    approvers by water-filling.  Spontaneous accepts can never exceed k
    because total currency is n.
    """

    def __init__(self) -> None:
        self.balances: list[Fraction] = []
        self.charges: list[dict[int, Fraction]] = []
        self._price = Fraction(0)

    def begin(self, m: int, n: int, k: int) -> None:
        self.balances = [Fraction(0)] + [Fraction(1)] * n  # 1-based ids
        self.charges = []
        self._price = Fraction(n, k)

    def decide(self, state: ReplayState, approvers: Committee) -> bool:
        pooled = sum((self.balances[v] for v in approvers), Fraction(0))
        if pooled < self._price:
            return False
        shares = water_fill(
            {v: self.balances[v] for v in approvers}, self._price
        )
        for voter, amount in shares.items():
            self.balances[voter] -= amount
        self.charges.append(shares)
        return True


class OgcaPolicy:
    """Accept when some cohesion level has enough under-served approvers.

    Level L fires when at least H(k) * L * n/k approvers have fewer than
    L accepted approved candidates so far.  On acceptance the seat price
    n/k is split across the witnessing group of the largest firing level
    (bookkeeping only — it never affects decisions) which keeps every
    voter's lifetime payment within one dollar and spontaneous accepts
    within k.
    """

    def __init__(self) -> None:
        self.sat: list[int] = []
        self.payments: list[Fraction] = []
        self._k = 0
        self._thresholds: list[Fraction] = []
        self._price = Fraction(0)

    def begin(self, m: int, n: int, k: int) -> None:
        self.sat = [0] * (n + 1)  # 1-based ids
        self.payments = [Fraction(0)] * (n + 1)
        self._k = k
        hk = harmonic(k)
        seat = Fraction(n, k)
        self._thresholds = [hk * level * seat for level in range(k + 1)]
        self._price = seat

    def decide(self, state: ReplayState, approvers: Committee) -> bool:
        if not approvers:
            return False
        sats = sorted(self.sat[v] for v in approvers)
        level_hit = 0
        for level in range(self._k, 0, -1):
            under_served = bisect_left(sats, level)
            if under_served >= self._thresholds[level]:
                level_hit = level
                break
        if level_hit == 0:
            return False
        group = [v for v in approvers if self.sat[v] < level_hit]
        share = self._price / len(group)
        for v in group:
            self.payments[v] += share
        for v in approvers:
            self.sat[v] += 1
        return True


class SgbrPolicy:
    """Per-scale coin budgets: geometric support floors, richest pay.

    With a = ceil(w(k)) (a**a >= k), every voter holds one coin of each
    type 1..a.  Type i only considers candidates with at least n*a^i/k
    approvers; the candidate is accepted if for some s in that range the
    s richest type-i supporters can each pay (n*a/k)/s, searching the
    largest type first, then the largest s.  Ties among equal balances
    are charged in ascending voter id.
    """

    def __init__(self) -> None:
        self.alpha = 0
        self.type_accepts: list[int] = []
        self._cost = Fraction(0)
        self._floors: list[Fraction] = []
        self._touched: list[dict[int, Fraction]] = []
        self._ranked: list[list[tuple[Fraction, int]]] = []

    def begin(self, m: int, n: int, k: int) -> None:
        self.alpha = ceil_w(k)
        self.type_accepts = [0] * (self.alpha + 1)
        self._cost = Fraction(n * self.alpha, k)
        self._floors = [Fraction(0)] + [
            Fraction(n * self.alpha**i, k) for i in range(1, self.alpha + 1)
        ]
        self._touched = [dict() for _ in range(self.alpha + 1)]
        self._ranked = [[] for _ in range(self.alpha + 1)]

    def balance(self, coin_type: int, voter: int) -> Fraction:
        return self._touched[coin_type].get(voter, Fraction(1))

    def decide(self, state: ReplayState, approvers: Committee) -> bool:
        s_max = len(approvers)
        for coin_type in range(self.alpha, 0, -1):
            if s_max < self._floors[coin_type]:
                continue
            s_min = math.ceil(self._floors[coin_type])
            # supporters holding less than a full coin, richest first
            dirty = [
                entry for entry in self._ranked[coin_type] if entry[1] in approvers
            ]
            untouched = s_max - len(dirty)
            for s in range(s_max, max(untouched, s_min - 1), -1):
                s_th_balance = dirty[s - untouched - 1][0]
                if s * s_th_balance >= self._cost:
                    self._charge(coin_type, approvers, dirty, s)
                    return True
            if untouched >= s_min:
                # s = untouched: full-coin holders alone pay (1*s >= cost
                # holds because the support floor is at least the cost)
                self._charge(coin_type, approvers, dirty, untouched)
                return True
        return False

    def _charge(
        self,
        coin_type: int,
        approvers: Committee,
        dirty: list[tuple[Fraction, int]],
        s: int,
    ) -> None:
        touched = self._touched[coin_type]
        fresh = sorted(v for v in approvers if v not in touched)
        chosen = (fresh + [voter for _, voter in dirty])[:s]
        share = self._cost / s
        for voter in chosen:
            touched[voter] = self.balance(coin_type, voter) - share
        self._ranked[coin_type] = sorted(
            ((balance, voter) for voter, balance in touched.items()),
            key=lambda entry: (-entry[0], entry[1]),
        )
        self.type_accepts[coin_type] += 1
