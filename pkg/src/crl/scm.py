"""Structural causal models with exact counterfactual inference."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from math import prod
from typing import Mapping

from .cbn import Cbn, Cpt, Query
from .core import Assignment, Distribution, Role, Variable, enum_guard, magnitude, merge
from .errors import DomainViolation, IncompleteAssignment, ModelError, TooLarge, ZeroEvidence
from .expr import Expr, evaluate
from .graph import CausalGraph, topo_order


@dataclass(frozen=True)
class LocalFn:
    """Deterministic mechanism child = f(parents), stored as a full lookup table.

    ``expr`` is kept only for display when the table was compiled from one.
    """

    child: str
    parents: tuple[str, ...]
    table: Mapping[tuple[str, ...], str]
    expr: Expr | None = field(default=None, compare=False)

    def __call__(self, values: Mapping[str, str]) -> str:
        return self.table[tuple(values[p] for p in self.parents)]

    @staticmethod
    def compile(child: Variable, parents: tuple[Variable, ...], expr: Expr) -> "LocalFn":
        table = {}
        for values in product(*(p.domain for p in parents)):
            env = {p.name: magnitude(v) for p, v in zip(parents, values)}
            try:
                out = evaluate(expr, env)
            except KeyError as missing:
                raise ModelError(f"equation for {child.name} references non-parent {missing}") from None
            hit = [v for v in child.domain if magnitude(v) == out]
            if not hit:
                raise DomainViolation(f"{child.name} evaluates to {out} outside its domain at {dict(zip((p.name for p in parents), values))}")
            table[values] = hit[0]
        return LocalFn(child.name, tuple(p.name for p in parents), table, expr)


@dataclass(frozen=True)
class Scm:
    graph: CausalGraph
    fns: Mapping[str, LocalFn]
    prior: Mapping[str, Mapping[str, Fraction]]

    def __post_init__(self):
        object.__setattr__(self, "fns", dict(self.fns))
        object.__setattr__(self, "prior", {k: {str(v): Fraction(p) for v, p in d.items()} for k, d in self.prior.items()})
        g = self.graph
        sources = set(g.sources())
        if set(self.prior) != sources:
            raise ModelError(f"priors must be given exactly for the source variables {sorted(sources)}")
        if set(self.fns) != set(g.names) - sources:
            raise ModelError("every non-source variable needs exactly one local function")
        for name, d in self.prior.items():
            if set(d) != set(g.var(name).domain) or sum(d.values()) != 1 or any(p < 0 for p in d.values()):
                raise ModelError(f"prior of {name} is not a distribution over its domain")
        for name, fn in self.fns.items():
            if set(fn.parents) != set(g.parents(name)):
                raise ModelError(f"local function parents of {name} differ from graph parents")
            doms = [g.var(p).domain for p in fn.parents]
            if set(fn.table) != set(product(*doms)):
                raise ModelError(f"local function of {name} does not cover every parent configuration")
            child = g.var(name)
            for out in fn.table.values():
                if out not in child.domain:
                    raise DomainViolation(f"{name} takes value {out} outside its domain")

    @cached_property
    def order(self) -> list[str]:
        return topo_order(self.graph)

    @cached_property
    def sources(self) -> tuple[str, ...]:
        return self.graph.sources()


def solve(m: Scm, sources: Mapping[str, str]) -> Assignment:
    if set(sources) != set(m.sources):
        raise IncompleteAssignment("sources must bind exactly the source variables")
    values = dict(sources)
    for n in m.order:
        if n not in values:
            values[n] = m.fns[n](values)
    return Assignment(values)


def _prior_of(m: Scm, u: Mapping[str, str]) -> Fraction:
    return prod((m.prior[k][v] for k, v in u.items()), start=Fraction(1))


def scm_joint(m: Scm, full: Mapping[str, str]) -> Fraction:
    missing = set(m.graph.names) - set(full)
    if missing:
        raise IncompleteAssignment(f"unbound: {sorted(missing)}")
    u = Assignment(full).restrict(m.sources)
    return _prior_of(m, u) if solve(m, u) == Assignment(full) else Fraction(0)


def submodel(m: Scm, do: Mapping[str, str]) -> Scm:
    g = m.graph
    for k, v in do.items():
        g.var(k).index(v)
    edges = {(p, c) for p, c in g.edges if c not in do}
    fns = {k: f for k, f in m.fns.items() if k not in do}
    prior = dict(m.prior)
    for k, v in do.items():
        prior[k] = {x: Fraction(x == v) for x in g.var(k).domain}
    return Scm(g.with_edges(edges), fns, prior)


def source_prior(m: Scm, joint: Distribution | None = None):
    """Iterate (source assignment, prior) pairs.

    ``joint`` optionally replaces the independent prior of the sources it
    covers with a joint distribution; remaining sources keep ``m.prior``.
    """
    covered = set(joint.variables) if joint is not None else set()
    rest = [s for s in m.sources if s not in covered]
    size = prod(len(m.prior[s]) for s in rest) * (len(joint) if joint is not None else 1)
    if size > enum_guard():
        raise TooLarge(f"{size} source assignments exceed the enumeration guard")
    heads = joint.items() if joint is not None else [(Assignment(), Fraction(1))]
    for head, ph in heads:
        for values in product(*(m.prior[s].items() for s in rest)):
            p = ph * prod((q for _, q in values), start=Fraction(1))
            if p:
                yield merge(head, zip(rest, (v for v, _ in values))), p


def abduct(m: Scm, evidence: Mapping[str, str], joint: Distribution | None = None) -> Distribution:
    weights = {}
    for u, p in source_prior(m, joint):
        if solve(m, u).agrees(evidence):
            weights[u] = p
    total = sum(weights.values(), Fraction(0))
    if total == 0:
        raise ZeroEvidence(f"P({Assignment(evidence)!r}) = 0")
    return Distribution({u: p / total for u, p in weights.items()})


def predict(m: Scm, posterior: Distribution, do: Mapping[str, str]) -> Distribution:
    """Distribution over full assignments of the submodel under ``posterior``."""
    sub = submodel(m, do)
    out: dict[Assignment, Fraction] = {}
    for u, p in posterior.items():
        w = solve(sub, merge(u.without(do), do))
        out[w] = out.get(w, Fraction(0)) + p
    return Distribution(out)


def counterfactual(m: Scm, q: Query, joint: Distribution | None = None) -> Fraction:
    """Abduction on all evidence, intervention, then prediction.

    The target is evaluated conditional on the evidence that is not
    downstream of the intervened variables.
    """
    posterior = abduct(m, q.evidence, joint)
    world = predict(m, posterior, q.interventions)
    affected = m.graph.descendants(q.interventions)
    keep = q.evidence.without(affected)
    den = world.prob(keep)
    if den == 0:
        raise ZeroEvidence("counterfactual conditioning event has probability zero")
    if not keep.agrees(q.targets):
        return Fraction(0)
    return world.prob(merge(keep, q.targets)) / den


def to_cbn(m: Scm) -> Cbn:
    g = m.graph
    cpts = {}
    for n in g.names:
        v = g.var(n)
        if n in m.prior:
            cpts[n] = Cpt.prior(v, (m.prior[n][x] for x in v.domain))
        else:
            fn = m.fns[n]
            cpts[n] = Cpt(n, fn.parents, {k: {x: Fraction(x == out) for x in v.domain} for k, out in fn.table.items()})
    return Cbn(g, cpts)


def conditional(m: Scm, q: Query) -> Fraction:
    from . import cbn

    return cbn.conditional(to_cbn(m), q)


def interventional(m: Scm, q: Query) -> Fraction:
    from . import cbn

    return cbn.interventional(to_cbn(m), q)


def noise_name(g: CausalGraph, name: str) -> str:
    base = f"U_{name}"
    out, k = base, 1
    while out in g.by_name:
        k += 1
        out = f"{base}{k}"
    return out


def from_cbn(m: Cbn) -> Scm:
    """Canonical response-function SCM with the same joint distribution.

    A variable whose CPT is deterministic keeps that function and gains no
    noise parent. Otherwise a latent ``U_<name>`` ranges over the response
    functions with positive prior, the prior of each being the product of
    the CPT entries it selects.
    """
    g = m.graph
    variables: list[Variable] = []
    edges = set(g.edges)
    fns: dict[str, LocalFn] = {}
    prior: dict[str, dict[str, Fraction]] = {}
    for v in g.variables:
        cpt = m.cpts[v.name]
        parents = g.parents(v.name)
        if not parents:
            variables.append(v)
            prior[v.name] = dict(cpt.rows[()])
            continue
        configs = list(product(*(g.var(p).domain for p in parents)))
        rows = [cpt.row(dict(zip(parents, c))) for c in configs]
        choices = [[(x, row[x]) for x in v.domain if row[x] > 0] for row in rows]
        count = prod(len(c) for c in choices)
        if count > enum_guard():
            raise TooLarge(f"{count} response functions for {v.name} exceed the enumeration guard")
        if count == 1:
            variables.append(v)
            fns[v.name] = LocalFn(v.name, parents, {c: ch[0][0] for c, ch in zip(configs, choices)})
            continue
        u = noise_name(g, v.name)
        labels = [f"r{k}" for k in range(count)]
        variables.append(Variable(u, tuple(labels), Role.STATE, v.slice))
        variables.append(v)
        edges.add((u, v.name))
        table = {}
        prior[u] = {}
        for label, picks in zip(labels, product(*choices)):
            prior[u][label] = prod((p for _, p in picks), start=Fraction(1))
            for c, (x, _) in zip(configs, picks):
                table[c + (label,)] = x
        fns[v.name] = LocalFn(v.name, parents + (u,), table)
    graph = CausalGraph(tuple(variables), frozenset(edges), g.observed)
    return Scm(graph, fns, prior)


def twin_predict(m: Cbn, posterior: Distribution, do: Mapping[str, str]) -> Distribution:
    """Intervened worlds of the canonical SCM of ``m``, given factual worlds.

    In the canonical conversion each parent configuration selects its value
    independently, so a factual world pins a mechanism only at the factual
    parent values. A variable whose parents keep their factual values keeps
    its factual value; otherwise it is redrawn from its CPT row. This equals
    ``predict(from_cbn(m), abduct(...), do)`` projected onto ``m``'s
    variables without enumerating response functions.
    """
    order = topo_order(m.graph)
    out: dict[Assignment, Fraction] = {}
    for f, pf in posterior.items():
        worlds = [({}, pf)]
        for n in order:
            cpt = m.cpts[n]
            grown = []
            for w, p in worlds:
                if n in do:
                    grown.append(({**w, n: str(do[n])}, p))
                    continue
                key = tuple(w[q] for q in cpt.parents)
                if key == tuple(f[q] for q in cpt.parents):
                    grown.append(({**w, n: f[n]}, p))
                    continue
                for v, q in cpt.rows[key].items():
                    if q:
                        grown.append(({**w, n: v}, p * q))
            worlds = grown
        for w, p in worlds:
            a = Assignment(w)
            out[a] = out.get(a, Fraction(0)) + p
    return Distribution(out)


def canonical_counterfactual(m: Cbn, q: Query) -> Fraction:
    """Counterfactual query on the canonical SCM of ``m`` via :func:`twin_predict`."""
    from . import cbn

    names = list(m.graph.names)
    factual = cbn.marginal(m, names, q.evidence)
    world = twin_predict(m, factual, q.interventions)
    keep = q.evidence.without(m.graph.descendants(q.interventions))
    den = world.prob(keep)
    if den == 0:
        raise ZeroEvidence("counterfactual conditioning event has probability zero")
    if not keep.agrees(q.targets):
        return Fraction(0)
    return world.prob(merge(keep, q.targets)) / den
