"""Acceptance gate: eleven end-to-end criteria, one test and one
printed PASS/FAIL line each (see the terminal summary block).

Tolerances are pinned inside each criterion: value comparisons are exact
rational equality unless a criterion explicitly states a numeric margin
(criterion 8 uses a one-sided 3-sigma margin, criterion 11 a 1e-9*k
residual).  Criteria 1, 2 and 9 assert published reference figures that
exact recomputation contradicts; they are implemented as stated and left
failing, with the discrepancy spelled out in their detail lines.
"""
from __future__ import annotations

import functools
import itertools
import math
import random
import statistics
import time
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest

from onelect import (
    AdversaryInfeasibleError,
    AdversarySpec,
    ApprovalPrior,
    Election,
    FixedDecisions,
    GreedyBudgetPolicy,
    OgcaPolicy,
    SecretaryPolicy,
    SgbrPolicy,
    ThieleFunction,
    adversary_stream,
    bellman_audit,
    build_cc_table,
    build_mav_table,
    build_thiele_table,
    ceil_w,
    check_ejr,
    check_pjr,
    crossover_k,
    harmonic,
    load_table,
    must_accept_total,
    offline_optimum,
    replay,
    resolve_thiele,
    score,
    smallest_feasible_n,
    stress,
    w_inverse,
)

from conftest import (
    enumerate_expected_score,
    random_election,
    record_acceptance,
    subset_distribution,
)
from test_audit import brute_ejr, brute_pjr

F = Fraction
HALF = F(1, 2)


def criterion(number: int):
    """Each test computes (ok, detail); the line is recorded either way."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                ok, detail = fn(*args, **kwargs)
            except Exception as exc:
                record_acceptance(number, False, f"aborted: {exc!r}")
                raise
            record_acceptance(number, ok, detail)
            if not ok:
                pytest.fail(f"criterion {number}: {detail}")

        return run

    return wrap


# ---------------------------------------------------------------------------
# 1. worked-example table reproduction


@criterion(1)
def test_criterion_01_reference_table_reproduction(published_table_text):
    t0 = time.perf_counter()
    built = build_mav_table(4, 3, 2, ApprovalPrior.uniform(HALF))
    build_seconds = time.perf_counter() - t0
    published = load_table(published_table_text)
    assert set(built.entries) == set(published.entries)
    assert len(built.entries) == 32
    mismatched = sorted(
        s for s in published.entries if built.entries[s] != published.entries[s]
    )
    # the quoted reference cells themselves
    quoted_ok = (
        built.entries[(1, 0, 0)] == (False, F(75, 16))
        and built.entries[(1, 0, 3)] == (True, F(81, 16))
    )
    ok = not mismatched and quoted_ok and build_seconds < 1.0
    matched = 32 - len(mismatched)
    detail = (
        f"built in {build_seconds:.3f}s (<1s ok); {matched}/32 entries match "
        f"the published table; differing states {mismatched} -- the published "
        f"figures fail their own one-step recomputation there (criterion 4 "
        f"machinery flags exactly those 5 states), e.g. quoted (1,0,0)=75/16 "
        f"vs recomputed {built.entries[(1, 0, 0)][1]}; (1,0,3)=81/16 matches"
    )
    return ok, detail


# ---------------------------------------------------------------------------
# 2. worked-example walk-through


@criterion(2)
def test_criterion_02_reference_walkthrough(appendix_election, published_table_text):
    e = appendix_election
    f = ThieleFunction.mav(2)
    table = build_mav_table(4, 3, 2, ApprovalPrior.uniform(HALF))
    result = replay(e, table.as_policy())
    achieved = score(e, f, result.committee)
    _, offline_best = offline_optimum(e, f)

    published = load_table(published_table_text)
    pub_committee = replay(e, published.as_policy()).committee
    pub_score = score(e, f, pub_committee)

    stated = result.committee == frozenset({2, 4}) and achieved == 3
    ok = stated and offline_best == 4
    detail = (
        f"offline optimum = {offline_best} (stated 4); stated replay "
        f"({{2,4}}, score 3) not met: the exact table plays "
        f"{sorted(result.committee)} scoring {achieved}; the published "
        f"figures do replay to ({sorted(pub_committee)}, score {pub_score}), "
        f"so the walk-through follows the 5 uncorrected table cells"
    )
    return ok, detail


# ---------------------------------------------------------------------------
# 3. planner optimality against exhaustive enumeration


def _brute_mav_value(m: int, n: int, k: int, p: Fraction) -> Fraction:
    """Online optimum by direct recursion on (arrival, accepted)."""
    pc = [math.comb(n, c) * p**c * (1 - p) ** (n - c) for c in range(n + 1)]
    expected_count = n * p

    @lru_cache(maxsize=None)
    def value(t: int, beta: int) -> Fraction:
        if t > m or beta == k:
            return F(0)
        rem = m - t + 1
        if beta + rem == k:
            return rem * expected_count
        return sum(
            pc[c] * max(F(c) + value(t + 1, beta + 1), value(t + 1, beta))
            for c in range(n + 1)
        )

    return value(1, 0)


def _brute_cc_value(m: int, n: int, k: int, p: Fraction) -> Fraction:
    """Online optimum by direct recursion on (arrival, accepted, covered set)."""
    cols = subset_distribution(n, [p] * n)

    @lru_cache(maxsize=None)
    def value(t: int, beta: int, covered: frozenset) -> Fraction:
        if t > m or beta == k:
            return F(0)
        tight = beta + (m - t + 1) == k
        total = F(0)
        for s, pr in cols:
            if pr == 0:
                continue
            accept = F(len(s - covered)) + value(t + 1, beta + 1, covered | s)
            total += pr * (
                accept if tight else max(accept, value(t + 1, beta, covered))
            )
        return total

    return value(1, 0, frozenset())


def _mav_free_layers(m: int, n: int, k: int) -> list[tuple[int, int]]:
    return [
        (t, beta)
        for t in range(1, m + 1)
        for beta in range(0, min(t - 1, k - 1) + 1)
        if beta + (m - t + 1) > k
    ]


def _mav_threshold_value(m, n, k, p, theta=None) -> Fraction:
    """Value of a per-layer count-threshold policy; with theta=None, the
    best threshold is chosen at each layer (valid backward induction:
    later layers' values never depend on earlier thresholds)."""
    pc = [math.comb(n, c) * p**c * (1 - p) ** (n - c) for c in range(n + 1)]
    table: dict[tuple[int, int], Fraction] = {}
    for t in range(m, 0, -1):
        for beta in range(0, min(t - 1, k - 1) + 1):
            rem = m - t + 1
            if beta + rem < k:
                continue
            if beta + rem == k:
                table[(t, beta)] = rem * n * p
                continue
            acc = table.get((t + 1, beta + 1), F(0))
            rej = table.get((t + 1, beta), F(0))
            choices = (
                range(n + 2) if theta is None else (theta[(t, beta)],)
            )
            table[(t, beta)] = max(
                sum(
                    pc[c] * ((F(c) + acc) if c >= th else rej)
                    for c in range(n + 1)
                )
                for th in choices
            )
    return table[(1, 0)]


def _cc_threshold_max(m, n, k, p) -> Fraction:
    """Best per-layer policy thresholding on the newly-covered count."""
    table: dict[tuple[int, int, int], Fraction] = {}
    for t in range(m, 0, -1):
        for beta in range(0, min(t - 1, k - 1) + 1):
            rem = m - t + 1
            if beta + rem < k:
                continue
            for g in range(n + 1):
                u = n - g
                dd = [
                    math.comb(u, d) * p**d * (1 - p) ** (u - d)
                    for d in range(u + 1)
                ]
                acc = [
                    F(d) + table.get((t + 1, beta + 1, g + d), F(0))
                    for d in range(u + 1)
                ]
                if beta + rem == k:
                    table[(t, beta, g)] = sum(
                        dd[d] * acc[d] for d in range(u + 1)
                    )
                    continue
                rej = table.get((t + 1, beta, g), F(0))
                table[(t, beta, g)] = max(
                    sum(
                        dd[d] * (acc[d] if d >= th else rej)
                        for d in range(u + 1)
                    )
                    for th in range(n + 2)
                )
    return table[(1, 0, 0)]


@criterion(3)
def test_criterion_03_planner_optimality_oracle():
    t0 = time.perf_counter()
    combos = [
        (m, n, k, p)
        for m in range(1, 5)
        for n in range(1, 4)
        for k in range(1, m + 1)
        for p in (F(1, 4), HALF, F(3, 4))
    ]
    literal = 0
    for m, n, k, p in combos:
        prior = ApprovalPrior.uniform(p)
        probs = [p] * n

        mav = build_mav_table(m, n, k, prior)
        assert _brute_mav_value(m, n, k, p) == mav.initial_value
        assert (
            enumerate_expected_score(
                m, n, k, probs, mav.as_policy, ThieleFunction.mav(k)
            )
            == mav.initial_value
        )
        assert _mav_threshold_value(m, n, k, p) == mav.initial_value
        layers = _mav_free_layers(m, n, k)
        if (n + 2) ** len(layers) <= 2000:
            for assign in itertools.product(range(n + 2), repeat=len(layers)):
                literal += 1
                val = _mav_threshold_value(m, n, k, p, dict(zip(layers, assign)))
                assert val <= mav.initial_value

        cc = build_cc_table(m, n, k, prior)
        assert _brute_cc_value(m, n, k, p) == cc.initial_value
        assert (
            enumerate_expected_score(
                m, n, k, probs, cc.as_policy, ThieleFunction.cc(k)
            )
            == cc.initial_value
        )
        assert _cc_threshold_max(m, n, k, p) <= cc.initial_value

    elapsed = time.perf_counter() - t0
    ok = elapsed < 300
    detail = (
        f"{len(combos)} (m,n,k,p) combos: matrix-enumerated expected score "
        f"== V_init exactly for the count and coverage planners; an "
        f"independent recursion reproduces both optima; every threshold "
        f"policy dominated (per-layer exhaustive maximisation plus {literal} "
        f"fully enumerated policies); {elapsed:.1f}s (<300s)"
    )
    return ok, detail


# ---------------------------------------------------------------------------
# 4. recomputation audit of every built table


@criterion(4)
def test_criterion_04_bellman_audit_clean():
    tables = [
        build_mav_table(4, 3, 2, ApprovalPrior.uniform(HALF)),
        build_mav_table(
            3, 2, 2, ApprovalPrior.typed([(1, F(1, 4)), (1, F(2, 3))])
        ),
        build_cc_table(4, 3, 2, ApprovalPrior.uniform(F(1, 4))),
        build_cc_table(3, 2, 1, ApprovalPrior.uniform(F(2, 3))),
        build_thiele_table(
            4, 3, 2, ApprovalPrior.uniform(HALF), ThieleFunction.pav(2)
        ),
        build_thiele_table(
            4, 2, 2, ApprovalPrior.uniform(F(2, 5)),
            ThieleFunction.from_weights((F(2), F(1, 3))),
        ),
    ]
    flagged = sum(len(bellman_audit(t)) for t in tables)
    states = sum(len(t.entries) for t in tables)
    ok = flagged == 0
    detail = (
        f"one-step recomputation reproduced the stored (decision, value) at "
        f"{states - flagged}/{states} states across {len(tables)} freshly "
        f"built tables (count/coverage/general scoring, incl. a typed prior)"
    )
    return ok, detail


# ---------------------------------------------------------------------------
# 5. pooled-budget rule: PJR plus money conservation


class _Conserving:
    """Pooled-budget policy wrapper asserting the money identity after
    every consulted arrival."""

    def __init__(self) -> None:
        self.inner = GreedyBudgetPolicy()
        self.accepted = 0
        self.checked = 0

    def begin(self, m: int, n: int, k: int) -> None:
        self.inner.begin(m, n, k)
        self.n, self.k = n, k
        self.accepted = 0

    def decide(self, state, approvers) -> bool:
        out = self.inner.decide(state, approvers)
        self.accepted += bool(out)
        held = sum(self.inner.balances[1:], F(0))
        assert held == self.n - self.accepted * F(self.n, self.k)
        self.checked += 1
        return out


@criterion(5)
def test_criterion_05_pooled_budget_pjr():
    t0 = time.perf_counter()
    rng = random.Random(5)
    arrivals_checked = 0
    for _ in range(1000):
        m = rng.randint(1, 20)
        k = rng.randint(1, min(6, m))
        n = rng.randint(1, 16)
        e = random_election(rng, m, n, k, p=rng.choice([0.2, 0.5]))
        policy = _Conserving()
        result = replay(e, policy)
        assert len(result.committee) == k
        assert check_pjr(e, result.committee, alpha=1).satisfied
        arrivals_checked += policy.checked
    elapsed = time.perf_counter() - t0
    ok = elapsed < 60
    detail = (
        f"1000/1000 seeded elections produced PJR(alpha=1) committees; the "
        f"budget identity held after each of {arrivals_checked} consulted "
        f"arrivals; {elapsed:.1f}s (<60s)"
    )
    return ok, detail


# ---------------------------------------------------------------------------
# 6. per-voter-charge rule: H(k)-EJR plus ledger bounds


@criterion(6)
def test_criterion_06_witness_charging_ejr():
    rng = random.Random(6)
    max_paid = F(0)
    for _ in range(500):
        m = rng.randint(1, 20)
        k = rng.randint(1, min(6, m))
        n = rng.randint(1, 16)
        e = random_election(rng, m, n, k, p=rng.choice([0.2, 0.5]))
        policy = OgcaPolicy()
        result = replay(e, policy)
        assert len(result.committee) == k
        spontaneous = sum(
            1 for d, why in zip(result.decisions, result.forced)
            if d and why is None
        )
        assert spontaneous <= k
        assert all(paid <= 1 for paid in policy.payments[1:])
        if n:
            max_paid = max(max_paid, max(policy.payments[1:]))
        assert check_ejr(e, result.committee, alpha=harmonic(k)).satisfied
    detail = (
        f"500/500 seeded elections satisfied EJR at alpha=H(k); no voter "
        f"ever paid more than 1 in total (max seen {max_paid}); spontaneous "
        f"selections never exceeded k"
    )
    return True, detail


# ---------------------------------------------------------------------------
# 7. type-floor rule: ceil(w(k))^2-EJR plus large-scale smoke run


@criterion(7)
def test_criterion_07_type_floor_ejr_and_smoke():
    rng = random.Random(7)
    for _ in range(500):
        m = rng.randint(1, 24)
        k = rng.randint(1, min(8, m))
        n = rng.randint(1, 32)
        e = random_election(rng, m, n, k, p=rng.choice([0.2, 0.5]))
        result = replay(e, SgbrPolicy())
        assert len(result.committee) == k
        assert check_ejr(e, result.committee, alpha=ceil_w(k) ** 2).satisfied

    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(7_000)))
    m, n, k = 10_000, 1_000, 32
    matrix = gen.random((m, n)) < 0.01
    approvals = [frozenset((np.nonzero(row)[0] + 1).tolist()) for row in matrix]
    big = Election.from_approvals(m, n, k, approvals)
    t0 = time.perf_counter()
    result = replay(big, SgbrPolicy())
    smoke = time.perf_counter() - t0
    ok = smoke < 10 and len(result.committee) == k
    detail = (
        f"500/500 seeded elections satisfied EJR at alpha=ceil(w(k))^2; "
        f"smoke replay at m=10^4 n=10^3 k=32 filled the committee in "
        f"{smoke:.2f}s (<10s)"
    )
    return ok, detail


# ---------------------------------------------------------------------------
# 8. observation-window policy: empirical competitive-ratio floor


@criterion(8)
def test_criterion_08_secretary_ratio_floor():
    m_cap = {1: 60, 2: 60, 3: 60, 4: 40, 5: 30, 6: 24}
    rng = random.Random(8)
    worst = None
    for i in range(20):
        f_name = ("mav", "pav", "cc")[i % 3]
        k = rng.randint(1, 6)
        while True:
            m = rng.randint(max(2 * k, 8), m_cap[k])
            n = rng.randint(2, 20)
            p = rng.choice([0.2, 1 / 3, 0.5])
            e = random_election(rng, m, n, k, p=p)
            f = resolve_thiele(f_name, k)
            _, best = offline_optimum(e, f)
            if best > 0:
                break
        ratios = []
        for _ in range(1000):
            order = list(range(m))
            rng.shuffle(order)
            shuffled = Election.from_approvals(
                m, n, k, [e.approvals[t] for t in order]
            )
            committee = replay(shuffled, SecretaryPolicy(f)).committee
            ratios.append(float(F(score(shuffled, f, committee)) / best))
        mean = statistics.fmean(ratios)
        stderr = statistics.stdev(ratios) / math.sqrt(len(ratios))
        margin = mean - 3 * stderr
        assert margin >= 0.09, (i, f_name, m, n, k, margin)
        if worst is None or margin < worst[0]:
            worst = (margin, f_name, m, n, k)
    detail = (
        f"20/20 scenarios (f in mav/pav/cc, offline optimum fixed per "
        f"election) kept mean ratio - 3*stderr >= 0.09 over 1000 arrival "
        f"permutations each; weakest margin {worst[0]:.3f} at f={worst[1]} "
        f"m={worst[2]} n={worst[3]} k={worst[4]}"
    )
    return True, detail


# ---------------------------------------------------------------------------
# 9. forced-acceptance lower-bound construction


@criterion(9)
def test_criterion_09_forced_acceptance_lower_bound():
    eps = F(1, 4)
    k_star = crossover_k(eps)
    forced = must_accept_total(k_star, eps)
    below = must_accept_total(k_star - 1, eps)
    assert k_star == 7527
    assert forced == 7530 and forced > k_star
    assert below == 7506 and below <= k_star - 1
    n_star = smallest_feasible_n(k_star, eps)
    assert n_star == 1_334_788

    try:
        adversary_stream(AdversarySpec(k_star, eps, n_star))
        feasible, note = True, "stream built"
    except AdversaryInfeasibleError as exc:
        feasible, note = False, str(exc)

    # scaled-down probe (k=6, same eps): only first-round rejections break
    # representation; rejecting a later forced candidate survives the audit
    small = adversary_stream(AdversarySpec(6, eps, smallest_feasible_n(6, eps)))
    alpha = (1 - eps) * harmonic(6)
    audits = {"ejr": lambda e, w: check_ejr(e, w, alpha=alpha)}
    first = stress(
        small, lambda: FixedDecisions([False] * 11), audits=audits
    )
    assert first.first_rejected == 1
    assert not first.audits["ejr"].satisfied
    later = stress(
        small,
        lambda: FixedDecisions([t < 4 for t in range(1, 12)]),
        audits=audits,
    )
    assert later.first_rejected == 4
    later_ok = later.audits["ejr"].satisfied

    # the stated clause needs the k* stream to be buildable and every
    # truncation point to fail the audit; neither holds
    ok = feasible and not later_ok
    detail = (
        f"counting clauses hold: k*={k_star}, forced {forced} > k*, "
        f"{below} <= {k_star - 1} below it, smallest n {n_star}; the "
        f"truncation clause is unmet: building the stream at k* needs "
        f"~1.16e9 ballot memberships ({note}); at the k=6 probe a "
        f"first-round rejection does fail EJR(alpha=(1-eps)H(k)) but a "
        f"round-2 rejection after taking round 1 passes it, so 'any "
        f"rejected' does not hold on this fixed stream"
    )
    return ok, detail


# ---------------------------------------------------------------------------
# 10. audit agreement with voter-subset brute force


@criterion(10)
def test_criterion_10_auditor_equivalence():
    rng = random.Random(10)
    ejr_satisfied = 0
    for _ in range(200):
        m = rng.randint(1, 8)
        k = rng.randint(1, m)
        n = rng.randint(1, 12)
        e = random_election(rng, m, n, k, p=rng.choice([0.25, 0.5, 0.75]))
        committee = frozenset(rng.sample(range(1, m + 1), k))
        ejr = check_ejr(e, committee)
        pjr = check_pjr(e, committee)
        assert ejr.satisfied == brute_ejr(e, committee)
        assert pjr.satisfied == brute_pjr(e, committee)
        if ejr.satisfied:
            assert pjr.satisfied
            ejr_satisfied += 1
    detail = (
        f"200/200 random (election, committee) pairs agree with the "
        f"voter-subset brute force for both axioms; the EJR=>PJR hierarchy "
        f"held on all {ejr_satisfied} EJR-satisfied pairs"
    )
    return True, detail


# ---------------------------------------------------------------------------
# 11. scalar utilities


@criterion(11)
def test_criterion_11_utility_functions():
    rng = random.Random(11)
    ks = list(range(1, 257)) + [rng.randrange(1, 10**6 + 1) for _ in range(300)]
    for k in ks:
        w = w_inverse(k)
        assert abs(w**w - k) <= 1e-9 * k
        c = ceil_w(k)
        assert c**c >= k
        assert c == 1 or (c - 1) ** (c - 1) < k
    for k in [*range(1, 401), 1000]:
        assert harmonic(k) == sum(F(1, i) for i in range(1, k + 1))
    detail = (
        f"w(k) residual <= 1e-9*k on {len(ks)} sampled k up to 10^6; "
        f"ceil(w(k)) verified by exact integer powers; H(k) equals direct "
        f"summation through k=400 and k=1000"
    )
    return True, detail
