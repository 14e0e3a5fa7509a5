"""Optimal online policies by backward induction under known priors.

Approvals are modeled as independent coin flips: each voter approves
each arriving candidate with a known probability (one shared value, or
per-cluster values).  Under such a prior the optimal accept/reject rule
for several scoring families depends only on a small sufficient
statistic of the history, so the full decision table can be built by
exact backward induction:

* additive scoring (every intersection member counts): states
  ``(alpha, beta, gamma)`` — arrival index, accepted count, current
  approver count;
* coverage scoring (only the first representative counts): states
  ``(alpha, beta, gamma, delta)`` — plus the number of still-uncovered
  voters, with ``gamma`` counting only uncovered approvers;
* general marginal-weight scoring: states ``(alpha, beta, hist)`` where
  ``hist`` is an anonymized histogram of ``(capped per-voter selected
  count, approves-current flag)`` cells.

All values are exact fractions.  Decision ties are broken toward
accepting and the tied states are flagged in the table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable, Iterator, Mapping

from .core import Committee, InternalInvariantError, ReplayState
from .thiele import ThieleFunction

StateKey = tuple
Entry = tuple[bool, Fraction]


class UnsupportedPriorError(ValueError):
    """The requested builder does not support this prior shape."""


class StateBudgetError(ValueError):
    """Building the table would exceed the allowed state count."""

    def __init__(self, estimate: int, budget: int):
        super().__init__(
            f"table needs about {estimate} states, over the budget of {budget}; "
            "raise state_budget explicitly to proceed"
        )
        self.estimate = estimate
        self.budget = budget


class TableFormatError(ValueError):
    """Raised when a dumped table cannot be parsed or fails integrity checks."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def _check_probability(p: Fraction) -> Fraction:
    p = Fraction(p)
    if not 0 <= p <= 1:
        raise ValueError(f"approval probability must lie in [0, 1], got {p}")
    return p


@dataclass(frozen=True)
class ApprovalPrior:
    """Independent per-voter approval probabilities for each arrival.

    ``uniform(p)``: every voter approves each arriving candidate with
    probability p, independently across voters and arrivals.
    ``typed(clusters)``: voters come in blocks — the first s1 voters
    approve with probability p1, the next s2 with p2, and so on.
    """

    kind: str
    p: Fraction | None = None
    clusters: tuple[tuple[int, Fraction], ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "uniform":
            if self.p is None:
                raise ValueError("uniform prior needs a probability")
        elif self.kind == "typed":
            if not self.clusters:
                raise ValueError("typed prior needs at least one cluster")
            for size, _ in self.clusters:
                if size < 1:
                    raise ValueError(f"cluster sizes must be >= 1, got {size}")
        else:
            raise ValueError(f"unknown prior kind {self.kind!r}")

    @classmethod
    def uniform(cls, p: Fraction | int | str) -> "ApprovalPrior":
        return cls("uniform", p=_check_probability(Fraction(p)))

    @classmethod
    def typed(
        cls, clusters: Iterator[tuple[int, Fraction]] | list[tuple[int, Fraction]]
    ) -> "ApprovalPrior":
        normalized = tuple(
            (int(size), _check_probability(Fraction(p))) for size, p in clusters
        )
        return cls("typed", clusters=normalized)

    @property
    def is_uniform(self) -> bool:
        return self.kind == "uniform"

    def voter_count(self) -> int | None:
        """The voter count a typed prior pins down (None for uniform)."""
        if self.kind == "uniform":
            return None
        return sum(size for size, _ in self.clusters)

    def per_voter_probs(self, n: int) -> list[Fraction]:
        if self.kind == "uniform":
            assert self.p is not None
            return [self.p] * n
        self._require_n(n)
        probs: list[Fraction] = []
        for size, p in self.clusters:
            probs.extend([p] * size)
        return probs

    def count_distribution(self, n: int) -> list[Fraction]:
        """Exact distribution of the number of approvers of one arrival."""
        if self.kind == "uniform":
            assert self.p is not None
            return _binom_row(n, self.p)
        self._require_n(n)
        dist = [Fraction(1)]
        for size, p in self.clusters:
            dist = _convolve(dist, _binom_row(size, p))
        return dist

    def _require_n(self, n: int) -> None:
        total = self.voter_count()
        if total != n:
            raise ValueError(
                f"typed prior covers {total} voters but the election has {n}"
            )

    def describe(self) -> str:
        if self.kind == "uniform":
            return f"uniform:{self.p}"
        body = ",".join(f"{size}@{p}" for size, p in self.clusters)
        return f"typed:{body}"

    @classmethod
    def parse(cls, text: str) -> "ApprovalPrior":
        kind, _, body = text.partition(":")
        if kind == "uniform" and body:
            return cls.uniform(Fraction(body))
        if kind == "typed" and body:
            clusters = []
            for chunk in body.split(","):
                size_str, _, p_str = chunk.partition("@")
                clusters.append((int(size_str), Fraction(p_str)))
            return cls.typed(clusters)
        raise ValueError(f"cannot parse prior spec {text!r}")


def _binom_row(size: int, p: Fraction) -> list[Fraction]:
    q = 1 - p
    return [math.comb(size, j) * p**j * q ** (size - j) for j in range(size + 1)]


def _convolve(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            out[i + j] += ai * bj
    return out


def reachable_betas(m: int, k: int, alpha: int) -> range:
    """Accepted counts that can actually occur when arrival alpha is decided.

    Below the lower end the committee could no longer be filled (the
    forced-accept override prevents that); above the upper end more than
    alpha-1 candidates would have been accepted already.
    """
    lo = max(0, k - (m - alpha + 1))
    hi = min(k, alpha - 1)
    return range(lo, hi + 1)


@dataclass(frozen=True)
class PolicyTable:
    """Complete decision/value table of an exactly-solved online policy."""

    rule: str
    m: int
    n: int
    k: int
    prior: ApprovalPrior
    entries: Mapping[StateKey, Entry]
    initial_value: Fraction
    ties: tuple[StateKey, ...]
    f: ThieleFunction | None = None

    def decision(self, key: StateKey) -> bool:
        return self.entries[key][0]

    def value(self, key: StateKey) -> Fraction:
        return self.entries[key][1]

    def as_policy(self) -> "TablePolicy":
        return TablePolicy(self)

    def __len__(self) -> int:
        return len(self.entries)


# ---------------------------------------------------------------------------
# additive scoring (every approved committee member counts once)


def build_mav_table(
    m: int, n: int, k: int, prior: ApprovalPrior
) -> PolicyTable:
    """Exact optimal table for additive scoring on states (alpha, beta, gamma).

    gamma is the number of approvers of the current arrival; accepting
    pays gamma immediately.  Works for uniform and typed priors (only
    the approver-count distribution enters).
    """
    dist = prior.count_distribution(n)
    entries: dict[StateKey, Entry] = {}
    ties: list[StateKey] = []
    for alpha in range(m, 0, -1):
        for beta in reachable_betas(m, k, alpha):
            if beta == k:
                for g in range(n + 1):
                    entries[(alpha, beta, g)] = (False, Fraction(0))
                continue
            if alpha == m:
                cont_yes = Fraction(0)
            else:
                cont_yes = sum(
                    (
                        dist[j] * entries[(alpha + 1, beta + 1, j)][1]
                        for j in range(n + 1)
                    ),
                    Fraction(0),
                )
            if beta + (m - alpha + 1) == k:
                for g in range(n + 1):
                    entries[(alpha, beta, g)] = (True, g + cont_yes)
                continue
            cont_no = sum(
                (dist[j] * entries[(alpha + 1, beta, j)][1] for j in range(n + 1)),
                Fraction(0),
            )
            for g in range(n + 1):
                v_yes = g + cont_yes
                if v_yes == cont_no:
                    ties.append((alpha, beta, g))
                if v_yes >= cont_no:
                    entries[(alpha, beta, g)] = (True, v_yes)
                else:
                    entries[(alpha, beta, g)] = (False, cont_no)
    initial = sum(
        (dist[g] * entries[(1, 0, g)][1] for g in range(n + 1)), Fraction(0)
    )
    return PolicyTable("mav", m, n, k, prior, entries, initial, tuple(sorted(ties)))


# ---------------------------------------------------------------------------
# coverage scoring (only a voter's first representative counts)


def build_cc_table(m: int, n: int, k: int, prior: ApprovalPrior) -> PolicyTable:
    """Exact optimal table for coverage scoring on (alpha, beta, gamma, delta).

    delta counts voters with no accepted representative yet; gamma <=
    delta counts those of them approving the current arrival.  Accepting
    pays gamma and shrinks the uncovered pool to delta - gamma; the next
    gamma is binomial over the remaining pool.
    """
    if not prior.is_uniform:
        raise UnsupportedPriorError(
            "coverage tables support uniform priors only; "
            "model voter blocks via the general builder or an additive table"
        )
    assert prior.p is not None
    pbin = [_binom_row(pool, prior.p) for pool in range(n + 1)]
    entries: dict[StateKey, Entry] = {}
    ties: list[StateKey] = []
    zeros = [Fraction(0)] * (n + 1)
    for alpha in range(m, 0, -1):
        for beta in reachable_betas(m, k, alpha):
            if beta == k:
                for delta in range(n + 1):
                    for g in range(delta + 1):
                        entries[(alpha, beta, g, delta)] = (False, Fraction(0))
                continue
            if alpha == m:
                cont_yes = zeros
            else:
                cont_yes = [
                    sum(
                        (
                            pbin[pool][i]
                            * entries[(alpha + 1, beta + 1, i, pool)][1]
                            for i in range(pool + 1)
                        ),
                        Fraction(0),
                    )
                    for pool in range(n + 1)
                ]
            if beta + (m - alpha + 1) == k:
                for delta in range(n + 1):
                    for g in range(delta + 1):
                        entries[(alpha, beta, g, delta)] = (
                            True,
                            g + cont_yes[delta - g],
                        )
                continue
            cont_no = [
                sum(
                    (
                        pbin[delta][i] * entries[(alpha + 1, beta, i, delta)][1]
                        for i in range(delta + 1)
                    ),
                    Fraction(0),
                )
                for delta in range(n + 1)
            ]
            for delta in range(n + 1):
                v_no = cont_no[delta]
                for g in range(delta + 1):
                    v_yes = g + cont_yes[delta - g]
                    if v_yes == v_no:
                        ties.append((alpha, beta, g, delta))
                    if v_yes >= v_no:
                        entries[(alpha, beta, g, delta)] = (True, v_yes)
                    else:
                        entries[(alpha, beta, g, delta)] = (False, v_no)
    initial = sum(
        (pbin[n][g] * entries[(1, 0, g, n)][1] for g in range(n + 1)),
        Fraction(0),
    )
    return PolicyTable("cc", m, n, k, prior, entries, initial, tuple(sorted(ties)))


# ---------------------------------------------------------------------------
# general marginal-weight scoring via flagged count histograms


def _capped_depth(f: ThieleFunction, k: int) -> int:
    return min(f.saturation, k)


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


def _hist_states(n: int, support: int, depth: int) -> Iterator[StateKey]:
    """Flagged histograms over counts 0..support, padded to depth+1 cells."""
    pad = ((0, 0),) * (depth - support)
    for comp in _compositions(n, 2 * (support + 1)):
        hist = tuple(
            (comp[2 * v], comp[2 * v + 1]) for v in range(support + 1)
        )
        yield hist + pad


def _counts_after_accept(hist: StateKey, depth: int) -> tuple[int, ...]:
    counts = [0] * (depth + 1)
    for v, (idle, appr) in enumerate(hist):
        counts[v] += idle
        counts[min(v + 1, depth)] += appr
    return tuple(counts)


def _counts_after_reject(hist: StateKey) -> tuple[int, ...]:
    return tuple(idle + appr for idle, appr in hist)


def thiele_state_estimate(m: int, n: int, k: int, f: ThieleFunction) -> int:
    """Number of histogram states the general builder would materialize."""
    depth = _capped_depth(f, k)
    total = 0
    for alpha in range(1, m + 1):
        for beta in reachable_betas(m, k, alpha):
            cells = 2 * (min(beta, depth) + 1)
            total += math.comb(n + cells - 1, cells - 1)
    return total


def build_thiele_table(
    m: int,
    n: int,
    k: int,
    prior: ApprovalPrior,
    f: ThieleFunction,
    state_budget: int = 3_000_000,
) -> PolicyTable:
    """Exact optimal table for any marginal-weight scoring function.

    States are (alpha, beta, hist) with hist an anonymized histogram of
    (capped selected-count, approves-current) voter cells; counts cap at
    the scoring function's saturation depth, beyond which further
    representatives are worthless.  Raises StateBudgetError up front if
    the histogram space would exceed ``state_budget`` states.
    """
    if not prior.is_uniform:
        raise UnsupportedPriorError(
            "the general builder supports uniform priors only "
            "(typed priors are available for additive tables)"
        )
    assert prior.p is not None
    estimate = thiele_state_estimate(m, n, k, f)
    if estimate > state_budget:
        raise StateBudgetError(estimate, state_budget)

    depth = _capped_depth(f, k)
    pbin = [_binom_row(size, prior.p) for size in range(n + 1)]
    # weight earned by one approving voter at capped count v
    gain = [f.marginal(v + 1) if v < depth else Fraction(0) for v in range(depth + 1)]
    entries: dict[StateKey, Entry] = {}
    ties: list[StateKey] = []
    flag_splits: dict[tuple[int, ...], list[tuple[Fraction, StateKey]]] = {}

    def splits_of(counts: tuple[int, ...]) -> list[tuple[Fraction, StateKey]]:
        """All (probability, histogram) refinements of a count vector."""
        cached = flag_splits.get(counts)
        if cached is not None:
            return cached
        out: list[tuple[Fraction, StateKey]] = []
        for split in product(*(range(g + 1) for g in counts)):
            prob = Fraction(1)
            for g_v, a_v in zip(counts, split):
                prob *= pbin[g_v][a_v]
            hist = tuple(
                (g_v - a_v, a_v) for g_v, a_v in zip(counts, split)
            )
            out.append((prob, hist))
        flag_splits[counts] = out
        return out

    expect_memo: dict[tuple[int, int, tuple[int, ...]], Fraction] = {}

    def expected_value(
        alpha_next: int, beta_next: int, counts: tuple[int, ...]
    ) -> Fraction:
        key = (alpha_next, beta_next, counts)
        cached = expect_memo.get(key)
        if cached is not None:
            return cached
        total = Fraction(0)
        for prob, hist in splits_of(counts):
            total += prob * entries[(alpha_next, beta_next, hist)][1]
        expect_memo[key] = total
        return total

    for alpha in range(m, 0, -1):
        for beta in reachable_betas(m, k, alpha):
            support = min(beta, depth)
            tight = beta + (m - alpha + 1) == k
            for hist in _hist_states(n, support, depth):
                key = (alpha, beta, hist)
                if beta == k:
                    entries[key] = (False, Fraction(0))
                    continue
                reward = sum(
                    (appr * gain[v] for v, (_, appr) in enumerate(hist)),
                    Fraction(0),
                )
                if alpha == m:
                    v_yes = reward
                else:
                    v_yes = reward + expected_value(
                        alpha + 1, beta + 1, _counts_after_accept(hist, depth)
                    )
                if tight:
                    entries[key] = (True, v_yes)
                    continue
                v_no = expected_value(alpha + 1, beta, _counts_after_reject(hist))
                if v_yes == v_no:
                    ties.append(key)
                if v_yes >= v_no:
                    entries[key] = (True, v_yes)
                else:
                    entries[key] = (False, v_no)

    initial = Fraction(0)
    pad = ((0, 0),) * depth
    for a in range(n + 1):
        hist0 = ((n - a, a),) + pad
        initial += pbin[n][a] * entries[(1, 0, hist0)][1]
    return PolicyTable(
        "thiele", m, n, k, prior, entries, initial, tuple(sorted(ties)), f=f
    )


# ---------------------------------------------------------------------------
# replaying a table as an online policy


class TablePolicy:
    """Adapter exposing a PolicyTable through the online-policy protocol.

    Tracks the per-voter bookkeeping the table's sufficient statistic
    needs (uncovered voters, capped counts).  The replay harness only
    consults policies on free arrivals, and its forced phases are
    permanent once entered, so the bookkeeping can never silently skip
    an arrival; a guard raises if that assumption is ever broken.
    """

    def __init__(self, table: PolicyTable):
        self._table = table
        self._next_t = 1
        self._unsat: set[int] = set()
        self._counts: list[int] = []

    def begin(self, m: int, n: int, k: int) -> None:
        t = self._table
        if (m, n, k) != (t.m, t.n, t.k):
            raise ValueError(
                f"table built for m={t.m} n={t.n} k={t.k}, "
                f"election has m={m} n={n} k={k}"
            )
        self._next_t = 1
        self._unsat = set(range(1, n + 1))
        self._counts = [0] * n

    def decide(self, state: ReplayState, approvers: Committee) -> bool:
        if state.t != self._next_t:
            raise InternalInvariantError(
                "table policy must be consulted on consecutive arrivals"
            )
        self._next_t += 1
        table = self._table
        alpha, beta = state.t, state.accepted_count
        if table.rule == "mav":
            key: StateKey = (alpha, beta, len(approvers))
        elif table.rule == "cc":
            gamma = len(approvers & self._unsat)
            key = (alpha, beta, gamma, len(self._unsat))
        else:
            depth = _capped_depth(table.f, table.k)  # type: ignore[arg-type]
            cells = [[0, 0] for _ in range(depth + 1)]
            for voter in range(1, state.n + 1):
                flag = 1 if voter in approvers else 0
                cells[self._counts[voter - 1]][flag] += 1
            key = (alpha, beta, tuple(tuple(c) for c in cells))
        try:
            accept = table.entries[key][0]
        except KeyError:
            raise InternalInvariantError(
                f"state {key!r} missing from {table.rule} table"
            ) from None
        if accept:
            if table.rule == "cc":
                self._unsat -= approvers
            elif table.rule == "thiele":
                depth = _capped_depth(table.f, table.k)  # type: ignore[arg-type]
                for voter in approvers:
                    idx = voter - 1
                    self._counts[idx] = min(self._counts[idx] + 1, depth)
        return accept


# ---------------------------------------------------------------------------
# dump / load

_TABLE_MAGIC = "# onelect-table v1"


def _state_to_tokens(rule: str, key: StateKey) -> list[str]:
    if rule in ("mav", "cc"):
        return [str(part) for part in key]
    alpha, beta, hist = key
    hist_str = ";".join(f"{idle},{appr}" for idle, appr in hist)
    return [str(alpha), str(beta), hist_str]


def _state_from_tokens(rule: str, tokens: list[str], line: int) -> StateKey:
    try:
        if rule == "mav":
            if len(tokens) != 3:
                raise ValueError("expected 'alpha beta gamma'")
            return tuple(int(t) for t in tokens)
        if rule == "cc":
            if len(tokens) != 4:
                raise ValueError("expected 'alpha beta gamma delta'")
            return tuple(int(t) for t in tokens)
        if len(tokens) != 3:
            raise ValueError("expected 'alpha beta histogram'")
        hist = tuple(
            tuple(int(x) for x in cell.split(",")) for cell in tokens[2].split(";")
        )
        for cell in hist:
            if len(cell) != 2 or cell[0] < 0 or cell[1] < 0:
                raise ValueError(f"bad histogram cell {cell}")
        return (int(tokens[0]), int(tokens[1]), hist)
    except ValueError as exc:
        raise TableFormatError(f"bad state: {exc}", line) from None


def _serialize_f(f: ThieleFunction | None) -> str:
    if f is None:
        return "-"
    weights = ",".join(str(w) for w in f.marginals)
    return f"{f.name}:{weights}"


def _parse_f(text: str) -> ThieleFunction | None:
    if text == "-":
        return None
    name, _, weights = text.partition(":")
    return ThieleFunction.from_weights(
        [Fraction(w) for w in weights.split(",")], name=name or "vec"
    )


def initial_value_from_entries(
    rule: str,
    m: int,
    n: int,
    k: int,
    prior: ApprovalPrior,
    entries: Mapping[StateKey, Entry],
    f: ThieleFunction | None,
) -> Fraction:
    """Expected value before the first arrival, from the stored first layer."""
    if rule == "mav":
        dist = prior.count_distribution(n)
        return sum(
            (dist[g] * entries[(1, 0, g)][1] for g in range(n + 1)), Fraction(0)
        )
    if rule == "cc":
        assert prior.p is not None
        dist = _binom_row(n, prior.p)
        return sum(
            (dist[g] * entries[(1, 0, g, n)][1] for g in range(n + 1)),
            Fraction(0),
        )
    assert f is not None and prior.p is not None
    depth = _capped_depth(f, k)
    dist = _binom_row(n, prior.p)
    pad = ((0, 0),) * depth
    return sum(
        (
            dist[a] * entries[(1, 0, ((n - a, a),) + pad)][1]
            for a in range(n + 1)
        ),
        Fraction(0),
    )


def dump_table(table: PolicyTable) -> str:
    """Plain-text form: header comments, then one 'state decision value' line."""
    tie_set = set(table.ties)
    lines = [
        _TABLE_MAGIC,
        (
            f"# rule={table.rule} m={table.m} n={table.n} k={table.k} "
            f"prior={table.prior.describe()} f={_serialize_f(table.f)} "
            f"vinit={table.initial_value} ties={len(table.ties)}"
        ),
    ]
    for key in sorted(table.entries):
        accept, value = table.entries[key]
        tokens = _state_to_tokens(table.rule, key)
        tokens.append("yes" if accept else "no")
        tokens.append(str(value))
        if key in tie_set:
            tokens.append("tie")
        lines.append(" ".join(tokens))
    return "\n".join(lines) + "\n"


def load_table(text: str) -> PolicyTable:
    """Parse a dumped table and re-verify its initial value."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != _TABLE_MAGIC:
        raise TableFormatError(f"missing magic header {_TABLE_MAGIC!r}", 1)
    meta: dict[str, str] = {}
    body_start = 1
    for i, raw in enumerate(lines[1:], start=2):
        stripped = raw.strip()
        if not stripped.startswith("#"):
            body_start = i
            break
        for token in stripped.lstrip("#").split():
            key, _, value = token.partition("=")
            if value:
                meta[key] = value
        body_start = i + 1
    required = ("rule", "m", "n", "k", "prior", "vinit")
    missing = [key for key in required if key not in meta]
    if missing:
        raise TableFormatError(f"header missing fields: {', '.join(missing)}", 2)
    rule = meta["rule"]
    if rule not in ("mav", "cc", "thiele"):
        raise TableFormatError(f"unknown rule {rule!r}", 2)
    try:
        m, n, k = int(meta["m"]), int(meta["n"]), int(meta["k"])
        prior = ApprovalPrior.parse(meta["prior"])
        header_vinit = Fraction(meta["vinit"])
        f = _parse_f(meta.get("f", "-"))
    except (ValueError, ZeroDivisionError) as exc:
        raise TableFormatError(f"bad header field: {exc}", 2) from None

    entries: dict[StateKey, Entry] = {}
    ties: list[StateKey] = []
    for line_no, raw in enumerate(lines[body_start - 1 :], start=body_start):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split()
        tie = tokens and tokens[-1] == "tie"
        if tie:
            tokens = tokens[:-1]
        if len(tokens) < 3:
            raise TableFormatError("expected 'state decision value'", line_no)
        decision_token, value_token = tokens[-2], tokens[-1]
        if decision_token not in ("yes", "no"):
            raise TableFormatError(
                f"decision must be yes/no, got {decision_token!r}", line_no
            )
        try:
            value = Fraction(value_token)
        except (ValueError, ZeroDivisionError):
            raise TableFormatError(f"bad value {value_token!r}", line_no) from None
        key = _state_from_tokens(rule, tokens[:-2], line_no)
        if key in entries:
            raise TableFormatError(f"duplicate state {key!r}", line_no)
        entries[key] = (decision_token == "yes", value)
        if tie:
            ties.append(key)
    if not entries:
        raise TableFormatError("table holds no states")
    try:
        recomputed = initial_value_from_entries(rule, m, n, k, prior, entries, f)
    except KeyError as exc:
        raise TableFormatError(f"first-layer state missing: {exc}") from None
    if recomputed != header_vinit:
        raise TableFormatError(
            f"header initial value {header_vinit} does not match the "
            f"stored first layer ({recomputed})"
        )
    return PolicyTable(rule, m, n, k, prior, entries, header_vinit, tuple(sorted(ties)), f=f)


# ---------------------------------------------------------------------------
# Bellman audit


def bellman_audit(table: PolicyTable) -> list[dict]:
    """Recompute every stored state from its stored successors.

    Returns one violation record per state whose stored decision or
    value disagrees with the one-step recomputation (ties must accept).
    An empty list means the table is exactly self-consistent.
    """
    recompute: Callable[[StateKey], Entry]
    if table.rule == "mav":
        recompute = _mav_expected(table)
    elif table.rule == "cc":
        recompute = _cc_expected(table)
    else:
        recompute = _thiele_expected(table)
    violations = []
    for key in table.entries:
        expected = recompute(key)
        stored = table.entries[key]
        if stored != expected:
            violations.append(
                {"state": key, "stored": stored, "expected": expected}
            )
    return violations


def _choose(v_yes: Fraction, v_no: Fraction) -> Entry:
    return (True, v_yes) if v_yes >= v_no else (False, v_no)


def _mav_expected(table: PolicyTable) -> Callable[[StateKey], Entry]:
    m, n, k = table.m, table.n, table.k
    dist = table.prior.count_distribution(n)

    def expected(key: StateKey) -> Entry:
        alpha, beta, gamma = key
        if beta == k:
            return (False, Fraction(0))
        if alpha == m:
            cont_yes = Fraction(0)
        else:
            cont_yes = sum(
                (
                    dist[j] * table.entries[(alpha + 1, beta + 1, j)][1]
                    for j in range(n + 1)
                ),
                Fraction(0),
            )
        v_yes = gamma + cont_yes
        if beta + (m - alpha + 1) == k:
            return (True, v_yes)
        v_no = sum(
            (
                dist[j] * table.entries[(alpha + 1, beta, j)][1]
                for j in range(n + 1)
            ),
            Fraction(0),
        )
        return _choose(v_yes, v_no)

    return expected


def _cc_expected(table: PolicyTable) -> Callable[[StateKey], Entry]:
    m, n, k = table.m, table.n, table.k
    assert table.prior.p is not None
    pbin = [_binom_row(pool, table.prior.p) for pool in range(n + 1)]

    def expected(key: StateKey) -> Entry:
        alpha, beta, gamma, delta = key
        if beta == k:
            return (False, Fraction(0))
        pool = delta - gamma
        if alpha == m:
            cont_yes = Fraction(0)
        else:
            cont_yes = sum(
                (
                    pbin[pool][i] * table.entries[(alpha + 1, beta + 1, i, pool)][1]
                    for i in range(pool + 1)
                ),
                Fraction(0),
            )
        v_yes = gamma + cont_yes
        if beta + (m - alpha + 1) == k:
            return (True, v_yes)
        v_no = sum(
            (
                pbin[delta][i] * table.entries[(alpha + 1, beta, i, delta)][1]
                for i in range(delta + 1)
            ),
            Fraction(0),
        )
        return _choose(v_yes, v_no)

    return expected


def _thiele_expected(table: PolicyTable) -> Callable[[StateKey], Entry]:
    m, n, k = table.m, table.n, table.k
    assert table.f is not None and table.prior.p is not None
    depth = _capped_depth(table.f, k)
    pbin = [_binom_row(size, table.prior.p) for size in range(n + 1)]
    gain = [
        table.f.marginal(v + 1) if v < depth else Fraction(0)
        for v in range(depth + 1)
    ]

    def successor_expectation(
        alpha_next: int, beta_next: int, counts: tuple[int, ...]
    ) -> Fraction:
        total = Fraction(0)
        for split in product(*(range(g + 1) for g in counts)):
            prob = Fraction(1)
            for g_v, a_v in zip(counts, split):
                prob *= pbin[g_v][a_v]
            hist = tuple((g_v - a_v, a_v) for g_v, a_v in zip(counts, split))
            total += prob * table.entries[(alpha_next, beta_next, hist)][1]
        return total

    def expected(key: StateKey) -> Entry:
        alpha, beta, hist = key
        if beta == k:
            return (False, Fraction(0))
        reward = sum(
            (appr * gain[v] for v, (_, appr) in enumerate(hist)), Fraction(0)
        )
        if alpha == m:
            v_yes = reward
        else:
            v_yes = reward + successor_expectation(
                alpha + 1, beta + 1, _counts_after_accept(hist, depth)
            )
        if beta + (m - alpha + 1) == k:
            return (True, v_yes)
        v_no = successor_expectation(alpha + 1, beta, _counts_after_reject(hist))
        return _choose(v_yes, v_no)

    return expected
