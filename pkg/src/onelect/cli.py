"""Command-line interface.

Subcommands: ``run`` (replay a policy on an election file), ``dp``
(build/dump an exact decision table), ``simulate`` (Monte Carlo
comparison against the offline optimum), ``adversary`` (hard-stream
construction and stress replay), ``oracle`` (offline optimum of a
file), ``audit`` (representation checks).  ``--json`` switches stdout
to machine-readable output.  Exit codes: 0 on success, 2 on bad input
or configuration, 1 on internal invariant failures.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .audit import AuditBudgetError, AuditReport, check_ejr, check_jr, check_pjr
from .budgeting import GreedyBudgetPolicy, OgcaPolicy, SgbrPolicy, harmonic
from .core import (
    AcceptAll,
    ElectionFormatError,
    InternalInvariantError,
    RejectAll,
    parse_election,
    replay,
    serialize_election,
)
from .dp import (
    ApprovalPrior,
    StateBudgetError,
    TableFormatError,
    UnsupportedPriorError,
    bellman_audit,
    build_cc_table,
    build_mav_table,
    build_thiele_table,
    dump_table,
    load_table,
)
from .secretary import SecretaryPolicy
from .simlab import (
    AdversaryInfeasibleError,
    AdversarySpec,
    GenSpec,
    adversary_stream,
    crossover_k,
    evaluate,
    must_accept_total,
    smallest_feasible_n,
    stress,
)
from .thiele import EnumerationBudgetError, offline_optimum, resolve_thiele, score

POLICY_NAMES = (
    "accept-all",
    "reject-all",
    "greedy-budget",
    "ogca",
    "sgbr",
    "secretary",
    "dp-mav",
    "dp-cc",
    "dp-thiele",
)


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")


def _parse_committee(text: str, m: int) -> frozenset[int]:
    try:
        members = frozenset(int(part) for part in text.split(","))
    except ValueError:
        raise ValueError(f"committee must be comma-separated positions, got {text!r}")
    for t in members:
        if not 1 <= t <= m:
            raise ValueError(f"committee member {t} out of range 1..{m}")
    return members


def _emit(args: argparse.Namespace, payload: dict, text_lines: list[str]) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


def _prior_from_args(args: argparse.Namespace) -> ApprovalPrior:
    if getattr(args, "typed", None):
        return ApprovalPrior.parse(f"typed:{args.typed}")
    if getattr(args, "p", None) is not None:
        return ApprovalPrior.uniform(args.p)
    raise ValueError("this command needs an approval prior: pass --p or --typed")


def _add_policy_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--f",
        metavar="SPEC",
        help="scoring spec: mav, pav, cc, or vec:w1,w2,... (exact rationals)",
    )
    parser.add_argument(
        "--p", type=_fraction, metavar="FRAC", help="uniform approval probability"
    )
    parser.add_argument(
        "--typed",
        metavar="SIZE@P,...",
        help="typed approval prior, e.g. 3@1/2,2@1/4",
    )
    parser.add_argument(
        "--table", metavar="FILE", help="load a previously dumped decision table"
    )
    parser.add_argument(
        "--state-budget",
        type=int,
        default=3_000_000,
        help="state cap for general table building (default %(default)s)",
    )


def _build_policy_factory(args: argparse.Namespace, m: int, n: int, k: int):
    """Returns (factory, description) for the requested policy name."""
    name = args.policy
    if name == "accept-all":
        return AcceptAll, name
    if name == "reject-all":
        return RejectAll, name
    if name == "greedy-budget":
        return GreedyBudgetPolicy, name
    if name == "ogca":
        return OgcaPolicy, name
    if name == "sgbr":
        return SgbrPolicy, name
    if name == "secretary":
        if not args.f:
            raise ValueError("policy 'secretary' needs --f")
        f = resolve_thiele(args.f, k)
        return (lambda: SecretaryPolicy(f)), name
    if name in ("dp-mav", "dp-cc", "dp-thiele"):
        if args.table:
            table = load_table(Path(args.table).read_text())
            expected = name.removeprefix("dp-")
            if table.rule != expected:
                raise ValueError(
                    f"table file holds a {table.rule!r} table, policy wants "
                    f"{expected!r}"
                )
            if (table.m, table.n, table.k) != (m, n, k):
                raise ValueError(
                    f"table built for m={table.m} n={table.n} k={table.k}, "
                    f"election has m={m} n={n} k={k}"
                )
        else:
            prior = _prior_from_args(args)
            if name == "dp-mav":
                table = build_mav_table(m, n, k, prior)
            elif name == "dp-cc":
                table = build_cc_table(m, n, k, prior)
            else:
                if not args.f:
                    raise ValueError("policy 'dp-thiele' needs --f")
                f = resolve_thiele(args.f, k)
                table = build_thiele_table(
                    m, n, k, prior, f, state_budget=args.state_budget
                )
        return table.as_policy, name
    raise ValueError(f"unknown policy {name!r}")


def _witness_payload(report: AuditReport) -> dict:
    payload: dict = {
        "axiom": report.axiom,
        "alpha": str(report.alpha),
        "satisfied": report.satisfied,
        "witness": None,
    }
    if report.witness is not None:
        w = report.witness
        payload["witness"] = {
            "level": w.level,
            "candidates": list(w.candidates),
            "voters": list(w.voters),
            "excluded": list(w.excluded) if w.excluded is not None else None,
        }
    return payload


def _witness_lines(report: AuditReport) -> list[str]:
    lines = [
        f"axiom: {report.axiom} (alpha={report.alpha})",
        f"satisfied: {'yes' if report.satisfied else 'no'}",
    ]
    if report.witness is not None:
        w = report.witness
        lines.append(
            f"witness: level={w.level} "
            f"candidates={','.join(map(str, w.candidates))} "
            f"voters={','.join(map(str, w.voters))}"
            + (
                f" excluded={','.join(map(str, w.excluded)) or '-'}"
                if w.excluded is not None
                else ""
            )
        )
    return lines


# ---------------------------------------------------------------------------
# subcommands


def _cmd_run(args: argparse.Namespace) -> int:
    election = parse_election(Path(args.election).read_text())
    factory, name = _build_policy_factory(args, election.m, election.n, election.k)
    result = replay(election, factory())
    committee = sorted(result.committee)
    payload: dict = {
        "policy": name,
        "committee": committee,
        "decisions": list(result.decisions),
        "forced": list(result.forced),
    }
    lines = [
        f"policy: {name}",
        f"committee: {' '.join(map(str, committee))}",
        "decisions: " + " ".join("yes" if d else "no" for d in result.decisions),
        "forced: "
        + " ".join(why if why else "-" for why in result.forced),
    ]
    if args.f:
        f = resolve_thiele(args.f, election.k)
        achieved = score(election, f, result.committee)
        payload["score"] = str(achieved)
        payload["f"] = args.f
        lines.append(f"score[{args.f}]: {achieved}")
    _emit(args, payload, lines)
    return 0


def _cmd_dp(args: argparse.Namespace) -> int:
    prior = _prior_from_args(args)
    if args.rule == "mav":
        table = build_mav_table(args.m, args.n, args.k, prior)
    elif args.rule == "cc":
        table = build_cc_table(args.m, args.n, args.k, prior)
    else:
        if not args.f:
            raise ValueError("rule 'thiele' needs --f")
        f = resolve_thiele(args.f, args.k)
        table = build_thiele_table(
            args.m, args.n, args.k, prior, f, state_budget=args.state_budget
        )
    text = dump_table(table)
    if args.out == "-":
        sys.stdout.write(text)
        return 0
    if args.out:
        Path(args.out).write_text(text)
    if args.audit:
        violations = bellman_audit(table)
        if violations:
            raise InternalInvariantError(
                f"freshly built table failed its own audit at "
                f"{len(violations)} states (first: {violations[0]['state']})"
            )
    payload = {
        "rule": table.rule,
        "m": table.m,
        "n": table.n,
        "k": table.k,
        "prior": table.prior.describe(),
        "initial_value": str(table.initial_value),
        "states": len(table.entries),
        "ties": len(table.ties),
        "audit": "pass" if args.audit else "skipped",
        "out": args.out,
    }
    lines = [
        f"rule: {table.rule}",
        f"dimensions: m={table.m} n={table.n} k={table.k}",
        f"prior: {table.prior.describe()}",
        f"initial value: {table.initial_value}",
        f"states: {len(table.entries)} (ties: {len(table.ties)})",
    ]
    if args.audit:
        lines.append("audit: pass")
    if args.out:
        lines.append(f"written: {args.out}")
    _emit(args, payload, lines)
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    if not args.f:
        raise ValueError("simulate needs --f")
    prior = _prior_from_args(args)
    spec = GenSpec(args.m, args.n, args.k, prior, seed=args.seed)
    f = resolve_thiele(args.f, args.k)
    factories = {}
    for name in args.policies.split(","):
        policy_args = argparse.Namespace(**vars(args))
        policy_args.policy = name.strip()
        factory, label = _build_policy_factory(policy_args, args.m, args.n, args.k)
        factories[label] = factory
    audits = {}
    if args.audits:
        for name in args.audits.split(","):
            name = name.strip()
            if name == "jr":
                audits["jr"] = check_jr
            elif name == "ejr":
                audits["ejr"] = check_ejr
            elif name == "pjr":
                audits["pjr"] = check_pjr
            else:
                raise ValueError(f"unknown audit {name!r}; expected jr, ejr or pjr")
    summary = evaluate(
        spec,
        factories,
        f,
        trials=args.trials,
        audits=audits or None,
        threads=args.threads,
        offline_budget=args.offline_budget,
    )
    payload = summary.to_json_dict()
    lines = [
        f"dimensions: m={summary.m} n={summary.n} k={summary.k} "
        f"prior={summary.prior} f={summary.f}",
        f"trials: {summary.trials} (seed {summary.seed})",
        f"offline mean: {summary.offline_mean:.6f}",
    ]
    for p in summary.policies:
        audit_note = " ".join(
            f"{name}={rate:.3f}" for name, rate in sorted(p.audits.items())
        )
        lines.append(
            f"{p.policy}: mean={p.mean:.6f}±{p.stderr:.6f} "
            f"ratio={p.ratio_mean:.4f}±{p.ratio_stderr:.4f}"
            + (f" audits[{audit_note}]" if audit_note else "")
        )
    if args.out_dir:
        from .reports import write_report

        paths = write_report(summary, args.out_dir)
        payload["files"] = [str(p) for p in paths]
        lines.extend(f"written: {p}" for p in paths)
    _emit(args, payload, lines)
    return 0


def _cmd_adversary(args: argparse.Namespace) -> int:
    epsilon = args.eps
    if args.crossover:
        k_star = crossover_k(epsilon, k_max=args.kmax)
        forced = must_accept_total(k_star, epsilon)
        n_star = smallest_feasible_n(k_star, epsilon)
        payload = {
            "epsilon": str(epsilon),
            "k_star": k_star,
            "must_accept": forced,
            "smallest_n": n_star,
        }
        lines = [
            f"epsilon: {epsilon}",
            f"smallest k forcing more than k accepts: {k_star}",
            f"forced candidates there: {forced}",
            f"smallest workable n there: {n_star}",
        ]
        _emit(args, payload, lines)
        return 0
    if args.k is None:
        raise ValueError("adversary needs --k (or --crossover)")
    n = args.n if args.n is not None else smallest_feasible_n(args.k, epsilon)
    spec = AdversarySpec(args.k, epsilon, n)
    stream = adversary_stream(spec, id_budget=args.id_budget)
    payload = {
        "k": args.k,
        "epsilon": str(epsilon),
        "n": n,
        "m": stream.election.m,
        "must_accept": len(stream.must_accept),
        "rounds": [
            {"round": r.index, "candidates": len(r.positions), "group_size": r.group_size}
            for r in stream.rounds
        ],
    }
    lines = [
        f"stream: m={stream.election.m} n={n} k={args.k} epsilon={epsilon}",
        f"forced candidates: {len(stream.must_accept)} in {len(stream.rounds)} rounds",
    ]
    lines.extend(
        f"round {r.index}: {len(r.positions)} candidates, groups of {r.group_size}"
        for r in stream.rounds
    )
    if args.out:
        Path(args.out).write_text(serialize_election(stream.election))
        payload["out"] = args.out
        lines.append(f"written: {args.out}")
    if args.policy:
        factory, name = _build_policy_factory(
            args, stream.election.m, stream.election.n, stream.election.k
        )
        alpha = (1 - epsilon) * harmonic(args.k)
        audits = {}

        def guarded_ejr(election, committee):
            return check_ejr(election, committee, alpha=alpha, budget=args.audit_budget)

        audits["ejr"] = guarded_ejr
        try:
            result = stress(stream, factory, audits)
            audit_payload = {
                name: _witness_payload(report)
                for name, report in result.audits.items()
            }
            payload["stress"] = {
                "policy": name,
                "taken": len(result.taken),
                "rejected": len(result.rejected),
                "first_rejected": result.first_rejected,
                "audits": audit_payload,
            }
            lines.append(
                f"stress[{name}]: took {len(result.taken)} of "
                f"{len(stream.must_accept)} forced candidates"
            )
            if result.first_rejected is not None:
                lines.append(
                    f"first forced rejection at position {result.first_rejected}"
                )
            for audit_name, report in result.audits.items():
                lines.extend(_witness_lines(report))
        except AuditBudgetError as exc:
            payload["stress"] = {"policy": name, "audit_error": str(exc)}
            lines.append(f"stress[{name}]: audit skipped: {exc}")
    _emit(args, payload, lines)
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    election = parse_election(Path(args.election).read_text())
    f = resolve_thiele(args.f, election.k)
    committee, best = offline_optimum(election, f, budget=args.budget)
    payload = {
        "f": args.f,
        "committee": sorted(committee),
        "score": str(best),
    }
    lines = [
        f"committee: {' '.join(map(str, sorted(committee)))}",
        f"score[{args.f}]: {best}",
    ]
    _emit(args, payload, lines)
    return 0


def _cmd_audit(args: argparse.Namespace) -> int:
    election = parse_election(Path(args.election).read_text())
    committee = _parse_committee(args.committee, election.m)
    if args.axiom == "jr":
        report = check_jr(election, committee, budget=args.budget)
    elif args.axiom == "ejr":
        report = check_ejr(election, committee, alpha=args.alpha, budget=args.budget)
    else:
        report = check_pjr(election, committee, alpha=args.alpha, budget=args.budget)
    _emit(args, _witness_payload(report), _witness_lines(report))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="onelect",
        description="Online approval committee elections: exact policies, "
        "replay, audits and simulation.",
    )
    parser.add_argument("--json", action="store_true", help="machine-readable stdout")
    parser.add_argument("--seed", type=int, default=0, help="base RNG seed")
    parser.add_argument(
        "--threads", type=int, default=1, help="worker threads for simulation"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="replay a policy over an election file")
    p_run.add_argument("--election", required=True, metavar="FILE")
    p_run.add_argument("--policy", required=True, choices=POLICY_NAMES)
    _add_policy_options(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_dp = sub.add_parser("dp", help="build an exact decision table")
    p_dp.add_argument("--rule", required=True, choices=("mav", "cc", "thiele"))
    p_dp.add_argument("--m", required=True, type=int)
    p_dp.add_argument("--n", required=True, type=int)
    p_dp.add_argument("--k", required=True, type=int)
    _add_policy_options(p_dp)
    p_dp.add_argument("--out", metavar="FILE", help="dump the table ('-' = stdout)")
    p_dp.add_argument(
        "--audit", action="store_true", help="re-verify the table before reporting"
    )
    p_dp.set_defaults(func=_cmd_dp)

    p_sim = sub.add_parser("simulate", help="Monte Carlo policy comparison")
    p_sim.add_argument("--m", required=True, type=int)
    p_sim.add_argument("--n", required=True, type=int)
    p_sim.add_argument("--k", required=True, type=int)
    p_sim.add_argument("--trials", required=True, type=int)
    p_sim.add_argument(
        "--policies",
        required=True,
        help="comma-separated policy names, e.g. greedy-budget,secretary",
    )
    _add_policy_options(p_sim)
    p_sim.add_argument(
        "--audits", help="comma-separated representation audits: jr, ejr, pjr"
    )
    p_sim.add_argument("--offline-budget", type=int, default=10_000_000)
    p_sim.add_argument(
        "--out-dir", metavar="DIR", help="write summary.json, trials.csv and figures"
    )
    p_sim.set_defaults(func=_cmd_simulate)

    p_adv = sub.add_parser("adversary", help="hard arrival streams")
    p_adv.add_argument("--eps", type=_fraction, required=True, metavar="FRAC")
    p_adv.add_argument("--k", type=int)
    p_adv.add_argument("--n", type=int, help="voters (default: smallest workable)")
    p_adv.add_argument(
        "--crossover",
        action="store_true",
        help="find the smallest k forcing more than k accepts",
    )
    p_adv.add_argument("--kmax", type=int, default=20_000)
    p_adv.add_argument("--id-budget", type=int, default=5_000_000)
    p_adv.add_argument("--audit-budget", type=int, default=2**24)
    p_adv.add_argument("--policy", choices=POLICY_NAMES, help="stress this policy")
    _add_policy_options(p_adv)
    p_adv.add_argument("--out", metavar="FILE", help="write the stream election file")
    p_adv.set_defaults(func=_cmd_adversary)

    p_oracle = sub.add_parser("oracle", help="offline optimum of an election file")
    p_oracle.add_argument("--election", required=True, metavar="FILE")
    p_oracle.add_argument("--f", required=True, metavar="SPEC")
    p_oracle.add_argument("--budget", type=int, default=10_000_000)
    p_oracle.set_defaults(func=_cmd_oracle)

    p_audit = sub.add_parser("audit", help="representation checks")
    p_audit.add_argument("--election", required=True, metavar="FILE")
    p_audit.add_argument(
        "--committee", required=True, help="comma-separated positions, e.g. 1,3,4"
    )
    p_audit.add_argument("--axiom", required=True, choices=("jr", "ejr", "pjr"))
    p_audit.add_argument("--alpha", type=_fraction, default=Fraction(1))
    p_audit.add_argument("--budget", type=int, default=2**24)
    p_audit.set_defaults(func=_cmd_audit)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InternalInvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1
    except (
        ElectionFormatError,
        TableFormatError,
        UnsupportedPriorError,
        StateBudgetError,
        EnumerationBudgetError,
        AuditBudgetError,
        AdversaryInfeasibleError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
