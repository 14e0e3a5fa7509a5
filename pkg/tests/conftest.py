"""Shared fixtures and helpers for the test suite."""
from __future__ import annotations

import itertools
import math
import pathlib
import random
from fractions import Fraction

import pytest

from onelect import Election, parse_election, replay, score

DATA_DIR = pathlib.Path(__file__).parent / "data"

# One (number, line) pair per acceptance criterion; printed after the run.
_ACCEPTANCE: dict[int, str] = {}


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    tag = "PASS" if ok else "FAIL"
    _ACCEPTANCE[number] = f"[{tag}] criterion {number:2d}: {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    if _ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])


def random_election(
    rng: random.Random, m: int, n: int, k: int, p: float = 0.5
) -> Election:
    """An election whose approvals are i.i.d. coin flips at rate p."""
    approvals = [
        frozenset(v for v in range(1, n + 1) if rng.random() < p)
        for _ in range(m)
    ]
    return Election.from_approvals(m, n, k, approvals)


def subset_distribution(
    n: int, probs: list[Fraction]
) -> list[tuple[frozenset[int], Fraction]]:
    """All 2^n approver sets with their exact product probabilities."""
    out = []
    for bits in range(1 << n):
        s = frozenset(v for v in range(1, n + 1) if bits >> (v - 1) & 1)
        pr = Fraction(1)
        for v in range(1, n + 1):
            pr *= probs[v - 1] if v in s else 1 - probs[v - 1]
        out.append((s, pr))
    return out


def enumerate_expected_score(
    m: int,
    n: int,
    k: int,
    probs: list[Fraction],
    policy_factory,
    f,
) -> Fraction:
    """Exact expected committee score of a policy, by exhausting all
    2^(m*n) approval matrices against their product probabilities."""
    columns = subset_distribution(n, probs)
    total = Fraction(0)
    for matrix in itertools.product(columns, repeat=m):
        prob = math.prod((pr for _, pr in matrix), start=Fraction(1))
        if prob == 0:
            continue
        e = Election.from_approvals(m, n, k, [s for s, _ in matrix])
        committee = replay(e, policy_factory()).committee
        total += prob * score(e, f, committee)
    return total


@pytest.fixture(scope="session")
def data_dir() -> pathlib.Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def appendix_election() -> Election:
    """The worked 4-candidate, 3-voter, k=2 example election."""
    return parse_election((DATA_DIR / "appendix.elect").read_text())


@pytest.fixture(scope="session")
def published_table_text() -> str:
    """The published decision-table figures for the worked example."""
    return (DATA_DIR / "published_mav_table.txt").read_text()
