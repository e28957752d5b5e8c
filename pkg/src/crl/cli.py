"""Command-line front end.

Exit codes: 0 ok, 1 check failure / reproduction mismatch / other model
error, 2 parse error, 3 zero-probability evidence, 4 unsupported query,
5 unsolvable evaluation, 6 non-executable policy.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Sequence

from . import cbn, scm
from .cbn import Cbn, Query
from .core import Assignment, Role
from .dsl import QueryAst, parse_model, parse_query
from .dynamic import Ddn, latent_dependence, simulate, unroll
from .errors import (
    CrlError,
    NotExecutable,
    ParseError,
    Unsolvable,
    UnsupportedQuery,
    ZeroEvidence,
)
from .evaluate import Mode, decimal_text, fraction_text, evaluate_epistemic
from .graph import (
    check_ddn_constraints,
    is_action_sufficient_cbn,
    is_action_sufficient_scm,
    latent_action_parents,
)
from .model import build, load_text
from .reproduce import manifest_json, run_reproduction
from .scm import Scm

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_ZERO, EXIT_UNSUPPORTED, EXIT_UNSOLVABLE, EXIT_NOT_EXECUTABLE = range(7)


def _load(source: str):
    try:
        text = load_text(source)
    except OSError as exc:
        raise ParseError(f"cannot read {source}: {exc.strerror or exc}", 1, 1) from None
    return build(parse_model(text))


def _assignment(text: str | None) -> Assignment | None:
    if not text:
        return None
    pairs = []
    for part in text.split(","):
        name, sep, value = part.strip().partition("=")
        if not sep or not name or not value:
            raise ParseError(f"expected NAME=VALUE, got {part.strip()!r}", 1, 1, ("NAME=VALUE",))
        pairs.append((name.strip(), value.strip()))
    return Assignment(pairs)


def _names(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [n.strip() for n in text.split(",") if n.strip()]


def _number(p: Fraction, decimal: int | None) -> str:
    return fraction_text(p) if decimal is None else f"{fraction_text(p)}\t{decimal_text(p, decimal)}"


# ---------------------------------------------------------------- check


def _check(args) -> int:
    m = _load(args.model)
    relax = args.relax_a3
    items: list[tuple[str, bool, str]] = [("acyclic", True, "")]
    structural = True
    graph = m.graph
    if isinstance(m, Ddn):
        report = check_ddn_constraints(graph)
        for line, edges in zip(report.lines(relax), (report.next_to_current, report.reward_out, report.action_to_state)):
            label, _, detail = line.partition(": ")
            ok = not edges or (relax and edges is report.action_to_state)
            items.append((label, ok, detail if edges else ""))
        structural = report.passed(relax)
    sufficient = True
    for a in graph.of_role(Role.ACTION, None):
        if isinstance(m, Ddn) and a != m.action:
            continue
        latent = latent_action_parents(graph, a)
        ok_cbn = is_action_sufficient_cbn(graph, a)
        ok_scm = is_action_sufficient_scm(graph, a)
        why = ", ".join(f"latent parent {p} of {a}" for p in latent)
        items.append((f"action-sufficient {a}", ok_cbn, why))
        items.append((f"action-sufficient {a} (scm sense)", ok_scm, "" if ok_scm else why))
        sufficient = sufficient and (ok_scm if isinstance(m, Scm) else ok_cbn)
    executable = True
    if isinstance(m, Ddn):
        observed = _names(args.observed) or sorted(m.observed)
        for name, p in m.policies.items():
            bad = latent_dependence(m, p, observed)
            why = "; ".join(f"depends on latent {c}" + (f" at {o.text()}" if o else "") for o, c in bad)
            items.append((f"policy {name} executable", not bad, why))
            executable = executable and not bad
    code = EXIT_OK
    if not structural or (args.require_sufficient and not sufficient) or (args.require_executable and not executable):
        code = EXIT_FAIL
    if args.json:
        print(json.dumps({"model": args.model, "checks": [{"check": k, "pass": ok, "detail": d} for k, ok, d in items], "exit": code}, indent=2))
    else:
        for k, ok, d in items:
            print(f"{k}: {'true' if ok else 'false'}" + (f" ({d})" if d else ""))
    return code


# ---------------------------------------------------------------- query


def _to_query(ast: QueryAst) -> Query:
    evidence = Assignment(ast.evidence)
    if ast.level != "counterfactual":
        return Query(Assignment((t.var, t.value) for t in ast.targets), evidence, Assignment(ast.do))
    subs = {t.subscript for t in ast.targets}
    if len(subs) != 1 or () in subs:
        raise UnsupportedQuery("counterfactual targets must share a single intervention subscript")
    if ast.do:
        raise UnsupportedQuery("counterfactual queries take plain evidence only; put interventions in the subscript")
    return Query(Assignment((t.var, t.value) for t in ast.targets), evidence, Assignment(next(iter(subs))), counterfactual=True)


def _query(args) -> int:
    m = _load(args.model)
    ast = parse_query(args.query)
    q = _to_query(ast)
    if isinstance(m, Ddn):
        if args.unroll:
            policy = _policy(m, args.policy) if args.policy else None
            m = unroll(m, args.unroll, policy)
        else:
            m = m.model
    if q.counterfactual:
        if isinstance(m, Cbn):
            if not args.canonical_scm:
                raise UnsupportedQuery(
                    "counterfactuals depend on the structural model; pass --canonical-scm to use the "
                    "canonical response-function conversion of this network"
                )
            m = scm.from_cbn(m)
        value = scm.counterfactual(m, q)
    elif isinstance(m, Scm):
        value = scm.interventional(m, q) if q.interventions else scm.conditional(m, q)
    else:
        value = cbn.interventional(m, q) if q.interventions else cbn.conditional(m, q)
    if args.json:
        out = {"query": args.query, "level": ast.level, "value": fraction_text(value)}
        if args.decimal is not None:
            out["decimal"] = decimal_text(value, args.decimal)
        print(json.dumps(out, indent=2))
    else:
        print(_number(value, args.decimal))
    return EXIT_OK


# ---------------------------------------------------------------- eval / simulate


def _ddn(m) -> Ddn:
    if not isinstance(m, Ddn):
        raise UnsupportedQuery("this command needs a dynamic (ddn) model")
    return m


def _policy(m: Ddn, name: str | None):
    if name is None:
        if not m.policies:
            raise UnsupportedQuery("model declares no policies")
        name = next(iter(m.policies))
    if name not in m.policies:
        raise UnsupportedQuery(f"unknown policy {name!r}; declared: {', '.join(m.policies)}")
    return m.policies[name]


def _eval(args) -> int:
    m = _ddn(_load(args.model))
    policy = _policy(m, args.policy)
    try:
        gamma = Fraction(args.gamma) if args.gamma is not None else None
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"--gamma expects a rational, got {args.gamma!r}", 1, 1) from None
    report = evaluate_epistemic(
        m,
        policy,
        Mode(args.mode),
        initial=_assignment(args.initial),
        observed=_names(args.observed),
        extra=_assignment(args.observe),
        gamma=gamma,
        solver=args.solver,
        steps=args.sweeps,
    )
    print(report.to_json() if args.json else report.table(args.decimal))
    return EXIT_OK


def _simulate(args) -> int:
    m = _ddn(_load(args.model))
    policy = _policy(m, args.policy)
    steps = simulate(m, policy, args.steps, args.seed, _names(args.observed))
    for s in steps:
        print(s.line(m))
    return EXIT_OK


def _reproduce(args) -> int:
    checks = run_reproduction()
    if args.json:
        print(manifest_json(checks))
    else:
        for c in checks:
            print(c.line())
        print(f"{sum(c.passed for c in checks)}/{len(checks)} values reproduced")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


# ---------------------------------------------------------------- parser


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--decimal", type=int, metavar="N", default=argparse.SUPPRESS, help="also print N-digit decimals")
    p.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="machine-readable output")
    p.add_argument("--relax-a3", action="store_true", default=argparse.SUPPRESS, help="report action-to-state edges without failing")
    p.add_argument("--canonical-scm", action="store_true", default=argparse.SUPPRESS, help="allow counterfactuals on networks via the canonical conversion")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="crl", description="Exact causal inference for decision models.", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="structural and sufficiency checks")
    c.add_argument("model", help="fixture name or .crl path")
    c.add_argument("--observed", help="comma-separated observation set for executability")
    c.add_argument("--require-sufficient", action="store_true", help="fail unless the action is sufficient")
    c.add_argument("--require-executable", action="store_true", help="fail unless every policy is executable")
    c.set_defaults(run=_check)

    q = sub.add_parser("query", parents=[common], help="exact probability query")
    q.add_argument("model")
    q.add_argument("query", help='e.g. "P(SC=1 | CG=1, do(SH=1))"')
    q.add_argument("--unroll", type=int, metavar="T", help="query a dynamic model unrolled over T slices")
    q.add_argument("--policy", help="policy replacing the network policy when unrolling")
    q.set_defaults(run=_query)

    e = sub.add_parser("eval", parents=[common], help="policy evaluation over epistemic states")
    e.add_argument("model")
    e.add_argument("--policy")
    e.add_argument("--mode", choices=[md.value for md in Mode], default=Mode.CONDITIONAL.value)
    e.add_argument("--initial", help="initial observation, e.g. CG=1")
    e.add_argument("--observe", help="extra evidence at the initial state (observed act or outcome)")
    e.add_argument("--observed", help="comma-separated observation set")
    e.add_argument("--gamma", help="discount override, e.g. 9/10")
    e.add_argument("--solver", choices=["linear", "iteration"], default="linear")
    e.add_argument("--sweeps", type=int, default=100, help="iteration solver sweeps")
    e.set_defaults(run=_eval)

    s = sub.add_parser("simulate", parents=[common], help="seeded trajectory")
    s.add_argument("model")
    s.add_argument("--policy")
    s.add_argument("--steps", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--observed", help="comma-separated observation set")
    s.set_defaults(run=_simulate)

    r = sub.add_parser("reproduce", parents=[common], help="check every reference value")
    r.set_defaults(run=_reproduce)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    for flag, default in (("decimal", None), ("json", False), ("relax_a3", False), ("canonical_scm", False)):
        if not hasattr(args, flag):
            setattr(args, flag, default)
    try:
        return args.run(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ZeroEvidence as exc:
        print(f"error: zero-probability evidence: {exc}", file=sys.stderr)
        return EXIT_ZERO
    except UnsupportedQuery as exc:
        print(f"error: unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except Unsolvable as exc:
        print(f"error: unsolvable: {exc}", file=sys.stderr)
        return EXIT_UNSOLVABLE
    except NotExecutable as exc:
        print(f"error: not executable: {exc}", file=sys.stderr)
        return EXIT_NOT_EXECUTABLE
    except CrlError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
