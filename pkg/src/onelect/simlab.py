"""Monte Carlo evaluation and adversarial stress streams.

``evaluate`` replays policies over seeded random elections and compares
them to the exact offline optimum; scores stay exact per trial, only
the aggregates are floats.  The adversary half materializes worst-case
arrival streams in which a committee-k-respecting policy with a
representation guarantee is forced to accept nearly every constructed
candidate; its counting oracle works at any size without materializing
anything.
"""
from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .audit import AuditReport
from .budgeting import harmonic
from .core import Committee, Election, OnlinePolicy, replay
from .dp import ApprovalPrior
from .thiele import ThieleFunction, offline_optimum, score

PolicyFactory = Callable[[], OnlinePolicy]
AuditFn = Callable[[Election, Committee], AuditReport]


@dataclass(frozen=True)
class GenSpec:
    """A reproducible family of random elections."""

    m: int
    n: int
    k: int
    prior: ApprovalPrior
    seed: int = 0


def sample_election(spec: GenSpec, trial: int) -> Election:
    """Election number ``trial`` of the family.

    Streams are derived as SeedSequence(seed, spawn_key=(trial,)) feeding
    PCG64, so trial i is reproducible in isolation.  Approval
    probabilities are applied in floating point here (sampling only);
    all downstream scoring stays exact.
    """
    seq = np.random.SeedSequence(spec.seed, spawn_key=(trial,))
    rng = np.random.Generator(np.random.PCG64(seq))
    probs = np.array(
        [float(p) for p in spec.prior.per_voter_probs(spec.n)], dtype=np.float64
    )
    matrix = rng.random((spec.m, spec.n)) < probs
    approvals = [
        frozenset(int(v) + 1 for v in np.flatnonzero(row)) for row in matrix
    ]
    return Election(spec.m, spec.n, spec.k, tuple(approvals))


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    policy: str
    score: Fraction
    offline: Fraction
    ratio: float
    audits: dict[str, bool]


@dataclass(frozen=True)
class PolicySummary:
    policy: str
    trials: int
    mean: float
    stderr: float
    ratio_mean: float
    ratio_stderr: float
    audits: dict[str, float]

    def to_json_dict(self) -> dict:
        return {
            "policy": self.policy,
            "trials": self.trials,
            "mean": self.mean,
            "stderr": self.stderr,
            "ratio_mean": self.ratio_mean,
            "ratio_stderr": self.ratio_stderr,
            "audits": dict(sorted(self.audits.items())),
        }


@dataclass(frozen=True)
class SimSummary:
    m: int
    n: int
    k: int
    prior: str
    f: str
    seed: int
    trials: int
    offline_mean: float
    policies: tuple[PolicySummary, ...]
    records: tuple[TrialRecord, ...]

    def to_json_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "k": self.k,
            "prior": self.prior,
            "f": self.f,
            "seed": self.seed,
            "trials": self.trials,
            "offline_mean": self.offline_mean,
            "policies": [p.to_json_dict() for p in self.policies],
        }


def _stderr(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    return statistics.stdev(values) / math.sqrt(len(values))


def evaluate(
    spec: GenSpec,
    policies: dict[str, PolicyFactory],
    f: ThieleFunction,
    trials: int,
    audits: dict[str, AuditFn] | None = None,
    threads: int = 1,
    offline_budget: int = 10_000_000,
) -> SimSummary:
    """Replay every policy over ``trials`` sampled elections.

    ``policies`` maps names to factories (a fresh policy instance per
    trial, so factories may capture shared immutable tables).  ``audits``
    maps names to ``fn(election, committee) -> AuditReport`` run on each
    trial's committee.  Results are deterministic for a given spec,
    regardless of ``threads``.
    """
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    audit_fns = audits or {}

    def run_trial(trial: int) -> tuple[Fraction, list[TrialRecord]]:
        election = sample_election(spec, trial)
        _, best = offline_optimum(election, f, budget=offline_budget)
        rows = []
        for name, factory in policies.items():
            result = replay(election, factory())
            achieved = score(election, f, result.committee)
            ratio = 1.0 if best == 0 else float(achieved / best)
            flags = {
                audit_name: bool(fn(election, result.committee).satisfied)
                for audit_name, fn in audit_fns.items()
            }
            rows.append(
                TrialRecord(trial, name, achieved, best, ratio, flags)
            )
        return best, rows

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run_trial, range(trials)))
    else:
        outcomes = [run_trial(t) for t in range(trials)]

    records: list[TrialRecord] = []
    for _, rows in outcomes:
        records.extend(rows)
    summaries = []
    for name in policies:
        mine = [r for r in records if r.policy == name]
        scores = [float(r.score) for r in mine]
        ratios = [r.ratio for r in mine]
        rates = {
            audit_name: sum(r.audits[audit_name] for r in mine) / trials
            for audit_name in audit_fns
        }
        summaries.append(
            PolicySummary(
                policy=name,
                trials=trials,
                mean=statistics.fmean(scores),
                stderr=_stderr(scores),
                ratio_mean=statistics.fmean(ratios),
                ratio_stderr=_stderr(ratios),
                audits=rates,
            )
        )
    return SimSummary(
        m=spec.m,
        n=spec.n,
        k=spec.k,
        prior=spec.prior.describe(),
        f=f.name,
        seed=spec.seed,
        trials=trials,
        offline_mean=statistics.fmean(float(best) for best, _ in outcomes),
        policies=tuple(summaries),
        records=tuple(records),
    )


# ---------------------------------------------------------------------------
# adversarial lower-bound streams


class AdversaryInfeasibleError(ValueError):
    """The requested stream cannot be materialized as specified."""


@dataclass(frozen=True)
class AdversarySpec:
    """Parameters of the hard-stream construction.

    epsilon in (0,1) trades strength for length; n must make
    (1-epsilon)*n/k an integer.  Round i presents m_i = floor(q/i)
    candidates (q = k/((1-epsilon)H(k))), each approved by a fresh block
    of ceil(i*(1-epsilon)*H(k)*n/k) voters; blocks are disjoint within a
    round and the voter pool is reused across rounds.
    """

    k: int
    epsilon: Fraction
    n: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"need k >= 1, got {self.k}")
        eps = Fraction(self.epsilon)
        if not 0 < eps < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {eps}")
        if self.n < 1:
            raise ValueError(f"need n >= 1, got {self.n}")


@dataclass(frozen=True)
class RoundInfo:
    index: int
    group_size: int
    positions: tuple[int, ...]  # arrival positions of this round's candidates
    groups: tuple[tuple[int, int], ...]  # inclusive voter ranges per candidate


@dataclass(frozen=True)
class AdversaryStream:
    spec: AdversarySpec
    election: Election
    rounds: tuple[RoundInfo, ...]
    must_accept: tuple[int, ...]


def _round_lengths(k: int, epsilon: Fraction) -> list[int]:
    q = Fraction(k) / ((1 - epsilon) * harmonic(k))
    lengths = []
    i = 1
    while True:
        m_i = q.numerator // (q.denominator * i)
        if m_i < 1:
            break
        lengths.append(m_i)
        i += 1
    return lengths


def must_accept_total(k: int, epsilon: Fraction) -> int:
    """How many candidates the stream forces, exactly, for any n."""
    return sum(_round_lengths(k, Fraction(epsilon)))


def crossover_k(epsilon: Fraction, k_max: int = 20_000) -> int:
    """Smallest k whose stream forces more than k acceptances.

    Scans in floating point and confirms the boundary with exact
    rational arithmetic.
    """
    epsilon = Fraction(epsilon)
    eps = float(epsilon)
    inv_h = 1.0 / np.cumsum(1.0 / np.arange(1, k_max + 1))
    for k in range(1, k_max + 1):
        q = k * inv_h[k - 1] / (1.0 - eps)
        rounds = int(q)
        if rounds < 1:
            continue
        total = float(np.floor(q / np.arange(1, rounds + 1)).sum())
        if total > k - 5:  # near or past the boundary: settle exactly
            if must_accept_total(k, epsilon) > k:
                return k
    raise ValueError(f"no crossover at or below k_max={k_max}")


def _group_size(i: int, k: int, epsilon: Fraction, n: int) -> int:
    return math.ceil(i * (1 - epsilon) * harmonic(k) * Fraction(n, k))


def smallest_feasible_n(
    k: int, epsilon: Fraction, multiple_limit: int = 10_000_000
) -> int:
    """Least n satisfying the integrality and round-fit constraints."""
    epsilon = Fraction(epsilon)
    share = (1 - epsilon) / k  # (1-eps)*n/k must be an integer
    base = share.denominator
    lengths = _round_lengths(k, epsilon)
    for t in range(1, multiple_limit + 1):
        n = t * base
        if all(
            m_i * _group_size(i, k, epsilon, n) <= n
            for i, m_i in enumerate(lengths, start=1)
        ):
            return n
    raise ValueError(f"no feasible n within {multiple_limit} multiples of {base}")


def adversary_stream(
    spec: AdversarySpec, id_budget: int = 5_000_000
) -> AdversaryStream:
    """Materialize the hard stream: forced rounds plus k empty arrivals.

    Raises AdversaryInfeasibleError when n violates integrality, a round
    does not fit into the voter pool, or the total approval volume
    exceeds ``id_budget``.
    """
    k, epsilon, n = spec.k, Fraction(spec.epsilon), spec.n
    if ((1 - epsilon) * Fraction(n, k)).denominator != 1:
        raise AdversaryInfeasibleError(
            f"(1-epsilon)*n/k = {(1 - epsilon) * Fraction(n, k)} is not an "
            f"integer; use n from smallest_feasible_n(k={k}, epsilon={epsilon})"
        )
    lengths = _round_lengths(k, epsilon)
    sizes = [_group_size(i, k, epsilon, n) for i in range(1, len(lengths) + 1)]
    for i, (m_i, g_i) in enumerate(zip(lengths, sizes), start=1):
        if m_i * g_i > n:
            raise AdversaryInfeasibleError(
                f"round {i} needs {m_i} disjoint groups of {g_i} voters "
                f"({m_i * g_i} total) but only {n} exist"
            )
    volume = sum(m_i * g_i for m_i, g_i in zip(lengths, sizes))
    if volume > id_budget:
        raise AdversaryInfeasibleError(
            f"stream would store {volume} approval ids, over the budget of "
            f"{id_budget}; raise id_budget explicitly to proceed"
        )

    approvals: list[frozenset[int]] = []
    rounds: list[RoundInfo] = []
    position = 1
    for i, (m_i, g_i) in enumerate(zip(lengths, sizes), start=1):
        positions = []
        groups = []
        for j in range(m_i):
            lo = j * g_i + 1
            hi = (j + 1) * g_i
            approvals.append(frozenset(range(lo, hi + 1)))
            positions.append(position)
            groups.append((lo, hi))
            position += 1
        rounds.append(RoundInfo(i, g_i, tuple(positions), tuple(groups)))
    must_accept = tuple(range(1, position))
    approvals.extend(frozenset() for _ in range(k))
    election = Election(len(approvals), n, k, tuple(approvals))
    return AdversaryStream(spec, election, tuple(rounds), must_accept)


def truncated_election(stream: AdversaryStream, position: int) -> Election:
    """The stream cut right after ``position``, padded with empty arrivals.

    Models an adaptive adversary that stops constructing candidates the
    moment one is rejected; padding keeps the committee fillable.
    """
    e = stream.election
    if not 1 <= position <= e.m:
        raise ValueError(f"position {position} out of range 1..{e.m}")
    prefix = list(e.approvals[:position])
    prefix.extend(frozenset() for _ in range(e.m - position))
    return Election(e.m, e.n, e.k, tuple(prefix))


@dataclass(frozen=True)
class StressResult:
    committee: Committee
    taken: tuple[int, ...]
    rejected: tuple[int, ...]
    first_rejected: int | None
    truncated_committee: Committee | None
    audits: dict[str, AuditReport]


def stress(
    stream: AdversaryStream,
    policy_factory: PolicyFactory,
    audits: dict[str, AuditFn] | None = None,
) -> StressResult:
    """Replay a policy on the stream; audit the adaptively truncated run.

    If the policy rejects any forced candidate, the audits run on the
    election truncated after the first such rejection (with the policy
    replayed afresh there); otherwise they run on the full stream.
    """
    result = replay(stream.election, policy_factory())
    rejected = tuple(
        t for t in stream.must_accept if not result.decisions[t - 1]
    )
    taken = tuple(t for t in stream.must_accept if result.decisions[t - 1])
    first = rejected[0] if rejected else None
    audit_fns = audits or {}
    if first is not None:
        cut = truncated_election(stream, first)
        cut_committee = replay(cut, policy_factory()).committee
        reports = {
            name: fn(cut, cut_committee) for name, fn in audit_fns.items()
        }
        return StressResult(
            result.committee, taken, rejected, first, cut_committee, reports
        )
    reports = {
        name: fn(stream.election, result.committee) for name, fn in audit_fns.items()
    }
    return StressResult(result.committee, taken, rejected, None, None, reports)
