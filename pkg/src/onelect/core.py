"""Core model for online approval-based committee elections.

An election has n voters and m candidates.  Candidates arrive one at a
time in positions 1..m; an online policy must irrevocably accept or
reject each arrival, and the final committee must contain exactly k
candidates.  Candidates are identified by arrival position throughout.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

Committee = frozenset[int]

FORCED_FULL = "full"
FORCED_TIGHT = "tight"


class ElectionFormatError(ValueError):
    """Raised when election text cannot be parsed.

    ``line`` is the 1-based physical line number of the offending line,
    when one can be attributed.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InternalInvariantError(AssertionError):
    """A harness guarantee was violated (bug, not user error)."""


@dataclass(frozen=True)
class Election:
    """An approval election over a fixed arrival order.

    ``approvals[t-1]`` is the set of voters (1-based ids) approving the
    candidate arriving at position t.
    """

    m: int
    n: int
    k: int
    approvals: tuple[Committee, ...]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"need at least one voter, got n={self.n}")
        if not 1 <= self.k <= self.m:
            raise ValueError(f"need 1 <= k <= m, got k={self.k}, m={self.m}")
        if len(self.approvals) != self.m:
            raise ValueError(
                f"expected {self.m} approval sets, got {len(self.approvals)}"
            )
        for t, voters in enumerate(self.approvals, start=1):
            for v in voters:
                if not 1 <= v <= self.n:
                    raise ValueError(
                        f"candidate {t}: voter id {v} out of range 1..{self.n}"
                    )

    def approvers(self, t: int) -> Committee:
        """Voters approving the candidate at arrival position t (1-based)."""
        if not 1 <= t <= self.m:
            raise ValueError(f"arrival position {t} out of range 1..{self.m}")
        return self.approvals[t - 1]

    def ballot(self, voter: int) -> Committee:
        """Candidate positions approved by ``voter`` (1-based id)."""
        if not 1 <= voter <= self.n:
            raise ValueError(f"voter id {voter} out of range 1..{self.n}")
        return frozenset(
            t for t, voters in enumerate(self.approvals, start=1) if voter in voters
        )

    def ballots(self) -> tuple[Committee, ...]:
        """All ballots, indexed by voter id - 1."""
        sets: list[set[int]] = [set() for _ in range(self.n)]
        for t, voters in enumerate(self.approvals, start=1):
            for v in voters:
                sets[v - 1].add(t)
        return tuple(frozenset(s) for s in sets)

    @classmethod
    def from_approvals(
        cls, m: int, n: int, k: int, approvals: Iterable[Iterable[int]]
    ) -> "Election":
        return cls(m, n, k, tuple(frozenset(a) for a in approvals))


def parse_election(text: str) -> Election:
    """Parse the plain-text election format.

    The first non-comment line is ``m n k``; the following m non-comment
    lines each hold the approver ids of one arrival (ascending not
    required), or ``-`` for an empty approval set.  Lines starting with
    ``#`` are comments.  Duplicate or out-of-range voter ids are
    rejected with the physical line number.
    """
    header: tuple[int, int, int] | None = None
    approvals: list[frozenset[int]] = []
    line_no = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith("#"):
            continue
        if not stripped:
            raise ElectionFormatError("blank line", line_no)
        if header is None:
            parts = stripped.split()
            if len(parts) != 3:
                raise ElectionFormatError(
                    f"header must be 'm n k', got {stripped!r}", line_no
                )
            try:
                m, n, k = (int(p) for p in parts)
            except ValueError:
                raise ElectionFormatError(
                    f"header must hold three integers, got {stripped!r}", line_no
                ) from None
            if m < 1 or n < 1 or not 1 <= k <= m:
                raise ElectionFormatError(
                    f"need m >= 1, n >= 1, 1 <= k <= m; got m={m} n={n} k={k}",
                    line_no,
                )
            header = (m, n, k)
            continue
        m, n, k = header
        if len(approvals) == m:
            raise ElectionFormatError(
                f"expected {m} approval lines, found extra content", line_no
            )
        if stripped == "-":
            approvals.append(frozenset())
            continue
        try:
            ids = [int(p) for p in stripped.split()]
        except ValueError:
            raise ElectionFormatError(
                f"approval line must hold voter ids or '-', got {stripped!r}",
                line_no,
            ) from None
        seen: set[int] = set()
        for v in ids:
            if not 1 <= v <= n:
                raise ElectionFormatError(
                    f"voter id {v} out of range 1..{n}", line_no
                )
            if v in seen:
                raise ElectionFormatError(f"duplicate voter id {v}", line_no)
            seen.add(v)
        approvals.append(frozenset(seen))
    if header is None:
        raise ElectionFormatError("empty input: missing 'm n k' header")
    m, n, k = header
    if len(approvals) != m:
        raise ElectionFormatError(
            f"expected {m} approval lines, found {len(approvals)}",
            line_no if line_no else None,
        )
    return Election(m, n, k, tuple(approvals))


def serialize_election(election: Election) -> str:
    """Render the canonical text form (sorted ids, single spaces, LF)."""
    lines = [f"{election.m} {election.n} {election.k}"]
    for voters in election.approvals:
        lines.append(" ".join(str(v) for v in sorted(voters)) if voters else "-")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ReplayState:
    """What a policy may observe when deciding on the current arrival.

    ``t`` is the arrival position being decided (1-based); ``selected``
    and ``decisions`` cover arrivals 1..t-1 only, so policies cannot
    look ahead.
    """

    t: int
    m: int
    n: int
    k: int
    selected: Committee
    decisions: tuple[bool, ...]

    @property
    def accepted_count(self) -> int:
        return len(self.selected)

    @property
    def remaining(self) -> int:
        """Arrivals still undecided, including the current one."""
        return self.m - self.t + 1


class OnlinePolicy(Protocol):
    """An irrevocable accept/reject rule over an arrival stream.

    ``begin`` is called once per replay with the election dimensions;
    ``decide`` is called only on *free* arrivals (the harness forces the
    decision whenever the committee is already full or every remaining
    arrival is needed to fill it).
    """

    def begin(self, m: int, n: int, k: int) -> None: ...

    def decide(self, state: ReplayState, approvers: Committee) -> bool: ...


@dataclass(frozen=True)
class ReplayResult:
    committee: Committee
    decisions: tuple[bool, ...]
    forced: tuple[str | None, ...]

    @property
    def forced_count(self) -> int:
        return sum(1 for f in self.forced if f is not None)


def replay(election: Election, policy: OnlinePolicy) -> ReplayResult:
    """Run ``policy`` over the arrival stream and return the outcome.

    Feasibility overrides are applied before the policy is consulted:
    with the committee full every arrival is rejected, and with exactly
    as many arrivals left as open seats every arrival is accepted.  The
    returned committee therefore always has exactly k members, whatever
    the policy does.
    """
    m, n, k = election.m, election.n, election.k
    policy.begin(m, n, k)
    selected: set[int] = set()
    decisions: list[bool] = []
    forced: list[str | None] = []
    for t in range(1, m + 1):
        if len(selected) == k:
            accept, why = False, FORCED_FULL
        elif len(selected) + (m - t + 1) == k:
            accept, why = True, FORCED_TIGHT
        else:
            state = ReplayState(
                t=t,
                m=m,
                n=n,
                k=k,
                selected=frozenset(selected),
                decisions=tuple(decisions),
            )
            accept, why = bool(policy.decide(state, election.approvers(t))), None
        if accept:
            selected.add(t)
        decisions.append(accept)
        forced.append(why)
    if len(selected) != k:
        raise InternalInvariantError(
            f"replay produced {len(selected)} members, expected {k}"
        )
    return ReplayResult(frozenset(selected), tuple(decisions), tuple(forced))


class AcceptAll:
    """Accept every free arrival (fills the committee with the first k)."""

    def begin(self, m: int, n: int, k: int) -> None:
        pass

    def decide(self, state: ReplayState, approvers: Committee) -> bool:
        return True


class RejectAll:
    """Reject every free arrival (ends up with the last k)."""

    def begin(self, m: int, n: int, k: int) -> None:
        pass

    def decide(self, state: ReplayState, approvers: Committee) -> bool:
        return False


class FixedDecisions:
    """Replay a predetermined accept/reject sequence (testing helper)."""

    def __init__(self, decisions: Sequence[bool]):
        self._decisions = tuple(bool(d) for d in decisions)

    def begin(self, m: int, n: int, k: int) -> None:
        if len(self._decisions) != m:
            raise ValueError(
                f"fixed decision sequence has {len(self._decisions)} entries, "
                f"election has {m} arrivals"
            )

    def decide(self, state: ReplayState, approvers: Committee) -> bool:
        return self._decisions[state.t - 1]
