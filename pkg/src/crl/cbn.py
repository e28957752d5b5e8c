"""Causal Bayesian networks: product-formula joint, truncation and exact queries.

Inference enumerates every full assignment. The weight of an assignment is an
integer numerator over the product of the CPTs' common denominators, so a
query is a ratio of two integer sums computed by :mod:`crl.kernel`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations, product
from math import lcm, prod
from typing import Callable, Iterable, Mapping

from . import kernel
from .core import Assignment, Distribution, Variable, enum_guard, merge
from .errors import (
    CriterionViolated,
    IncompleteAssignment,
    ModelError,
    TooLarge,
    UnknownVariable,
    ZeroEvidence,
)
from .graph import CausalGraph, satisfies_backdoor, topo_order


@dataclass(frozen=True)
class Cpt:
    """P(child | parents) as rows keyed by parent-value tuples.

    Each row maps every child value to its probability.
    """

    child: str
    parents: tuple[str, ...]
    rows: Mapping[tuple[str, ...], Mapping[str, Fraction]]

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(
            self,
            "rows",
            {tuple(k): {str(v): Fraction(p) for v, p in r.items()} for k, r in self.rows.items()},
        )

    def row(self, values: Mapping[str, str]) -> Mapping[str, Fraction]:
        return self.rows[tuple(values[p] for p in self.parents)]

    def prob(self, value: str, values: Mapping[str, str]) -> Fraction:
        return self.row(values)[value]

    def is_deterministic(self) -> bool:
        return all(all(p in (0, 1) for p in r.values()) for r in self.rows.values())

    @staticmethod
    def point(child: Variable, value: str) -> "Cpt":
        return Cpt(child.name, (), {(): {v: Fraction(v == value) for v in child.domain}})

    @staticmethod
    def prior(child: Variable, probs: Iterable) -> "Cpt":
        return Cpt(child.name, (), {(): dict(zip(child.domain, map(Fraction, probs)))})

    @staticmethod
    def deterministic(child: Variable, parents: Iterable[Variable], fn: Callable[[dict], str]) -> "Cpt":
        parents = tuple(parents)
        rows = {}
        for values in product(*(p.domain for p in parents)):
            out = fn(dict(zip((p.name for p in parents), values)))
            rows[values] = {v: Fraction(v == out) for v in child.domain}
        return Cpt(child.name, tuple(p.name for p in parents), rows)


@dataclass(frozen=True)
class Query:
    """A probability query.

    With ``counterfactual`` false, ``interventions`` are do() terms on the
    evidence side. With it true, ``targets`` are potential outcomes under
    ``interventions`` and ``evidence`` describes the factual world.
    """

    targets: Assignment
    evidence: Assignment = field(default_factory=Assignment)
    interventions: Assignment = field(default_factory=Assignment)
    counterfactual: bool = False

    def __post_init__(self):
        for name in ("targets", "evidence", "interventions"):
            value = getattr(self, name)
            if not isinstance(value, Assignment):
                object.__setattr__(self, name, Assignment(value))
        if not self.counterfactual and set(self.evidence) & set(self.interventions):
            raise ValueError("evidence and interventions bind the same variable")


@dataclass(frozen=True)
class Cbn:
    graph: CausalGraph
    cpts: Mapping[str, Cpt]

    def __post_init__(self):
        object.__setattr__(self, "cpts", dict(self.cpts))
        g = self.graph
        if set(self.cpts) != set(g.names):
            missing = set(g.names) - set(self.cpts)
            extra = set(self.cpts) - set(g.names)
            raise ModelError(f"cpt/variable mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
        for name, cpt in self.cpts.items():
            if cpt.child != name:
                raise ModelError(f"cpt for {name} names child {cpt.child}")
            if set(cpt.parents) != set(g.parents(name)) or len(cpt.parents) != len(set(cpt.parents)):
                raise ModelError(f"cpt parents of {name} differ from graph parents")
            child = g.var(name)
            configs = set(product(*(g.var(p).domain for p in cpt.parents)))
            if set(cpt.rows) != configs:
                raise ModelError(f"cpt for {name} does not cover each parent configuration exactly once")
            for key, row in cpt.rows.items():
                if set(row) != set(child.domain):
                    raise ModelError(f"cpt row {key} of {name} does not match the domain")
                if any(p < 0 or p > 1 for p in row.values()) or sum(row.values()) != 1:
                    raise ModelError(f"cpt row {key} of {name} is not a distribution")

    @cached_property
    def order(self) -> list[str]:
        return topo_order(self.graph)

    @cached_property
    def cards(self) -> list[int]:
        return [v.card for v in self.graph.variables]

    @cached_property
    def _pos(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.graph.names)}

    @cached_property
    def _factors(self) -> tuple[list, int]:
        factors = []
        denominator = 1
        g = self.graph
        for name in g.names:
            cpt = self.cpts[name]
            child = g.var(name)
            scale = lcm(*(p.denominator for r in cpt.rows.values() for p in r.values()))
            table = []
            for key in product(*(g.var(p).domain for p in cpt.parents)):
                row = cpt.rows[key]
                table.extend(int(row[v] * scale) for v in child.domain)
            factors.append(([self._pos[p] for p in cpt.parents] + [self._pos[name]], table))
            denominator *= scale
        return factors, denominator

    @cached_property
    def weights(self):
        size = prod(self.cards)
        if size > enum_guard():
            raise TooLarge(f"{size} assignments exceed the enumeration guard {enum_guard()}")
        factors, denominator = self._factors
        return kernel.joint_weights(self.cards, factors, denominator)

    @property
    def denominator(self) -> int:
        return self._factors[1]

    def _fixed(self, a: Mapping[str, str]) -> dict[int, int]:
        out = {}
        for k, v in a.items():
            if k not in self._pos:
                raise UnknownVariable(k)
            out[self._pos[k]] = self.graph.var(k).index(v)
        return out

    def mass(self, event: Mapping[str, str]) -> Fraction:
        """Probability of a partial assignment."""
        total = kernel.project(self.weights, self.cards, self._fixed(event), [])[0]
        return Fraction(total, self.denominator)

    def table(self, names: Iterable[str], evidence: Mapping[str, str] = Assignment()) -> dict[Assignment, Fraction]:
        """Unnormalized P(names, evidence) for every configuration of ``names``."""
        names = list(names)
        keep = [self._pos[n] for n in names]
        sums = kernel.project(self.weights, self.cards, self._fixed(evidence), keep)
        doms = [self.graph.var(n).domain for n in names]
        return {
            Assignment(zip(names, values)): Fraction(s, self.denominator)
            for values, s in zip(product(*doms), sums)
        }

    def p(self, name: str, value: str, values: Mapping[str, str]) -> Fraction:
        return self.cpts[name].prob(value, values)


def joint(m: Cbn, full: Mapping[str, str]) -> Fraction:
    full = Assignment(full)
    missing = set(m.graph.names) - set(full)
    if missing:
        raise IncompleteAssignment(f"unbound: {sorted(missing)}")
    return prod((m.p(n, full[n], full) for n in m.graph.names), start=Fraction(1))


def truncate(m: Cbn, do: Mapping[str, str]) -> Cbn:
    g = m.graph
    for k, v in do.items():
        g.var(k).index(v)
    edges = {(p, c) for p, c in g.edges if c not in do}
    cpts = dict(m.cpts)
    for k, v in do.items():
        cpts[k] = Cpt.point(g.var(k), v)
    return Cbn(g.with_edges(edges), cpts)


def marginal(m: Cbn, names: Iterable[str], evidence: Mapping[str, str] = Assignment()) -> Distribution:
    """Exact posterior P(names | evidence)."""
    t = m.table(names, evidence)
    total = sum(t.values(), Fraction(0))
    if total == 0:
        raise ZeroEvidence(f"P({Assignment(evidence)!r}) = 0")
    return Distribution({k: w / total for k, w in t.items()})


def conditional(m: Cbn, q: Query) -> Fraction:
    if q.interventions or q.counterfactual:
        raise ValueError("conditional query with interventions")
    den = m.mass(q.evidence)
    if den == 0:
        raise ZeroEvidence(f"P({q.evidence!r}) = 0")
    if not q.evidence.agrees(q.targets):
        return Fraction(0)
    return m.mass(merge(q.evidence, q.targets)) / den


def interventional(m: Cbn, q: Query) -> Fraction:
    if q.counterfactual:
        raise ValueError("counterfactual query passed to interventional")
    t = truncate(m, q.interventions)
    return conditional(t, Query(q.targets, merge(q.evidence, q.interventions)))


def _uniform_action(m: Cbn, action: str) -> Cbn:
    cpts = dict(m.cpts)
    old = cpts[action]
    dom = m.graph.var(action).domain
    cpts[action] = Cpt(action, old.parents, {k: {v: Fraction(1, len(dom)) for v in dom} for k in old.rows})
    return Cbn(m.graph, cpts)


def backdoor_adjust(
    m: Cbn,
    action: Mapping[str, str],
    target: Mapping[str, str],
    evidence: Mapping[str, str],
    adj: Iterable[str],
) -> Fraction:
    """Σ_z P(z | evidence) · P(target | z, evidence, action).

    Refuses with :class:`CriterionViolated` unless ``adj`` together with the
    evidence variables satisfies the backdoor criterion for every target.
    """
    action, target, evidence = Assignment(action), Assignment(target), Assignment(evidence)
    adj = list(adj)
    if len(action) != 1:
        raise ValueError("backdoor adjustment takes exactly one action binding")
    (a,) = action
    covariates = set(adj) | set(evidence)
    for t in target:
        if t in covariates or t == a or not satisfies_backdoor(m.graph, a, t, covariates):
            raise CriterionViolated(f"{sorted(covariates)} does not satisfy the backdoor criterion for {a} -> {t}")
    completed = None
    total = Fraction(0)
    for z, pz in marginal(m, adj, evidence).items():
        given = merge(merge(z, evidence), action)
        try:
            term = conditional(m, Query(target, given))
        except ZeroEvidence:
            # positivity gap: the term does not depend on the action mechanism
            completed = completed or _uniform_action(m, a)
            term = conditional(completed, Query(target, given))
        total += pz * term
    return total


def check_action_minimality(m: Cbn, action: str, limit: int = 12) -> bool:
    names = m.graph.names
    if len(names) > limit:
        raise TooLarge(f"{len(names)} variables exceed the minimality guard {limit}")
    for x in m.graph.parents(action):
        rest = [n for n in names if n not in (x, action)]
        for k in range(len(rest) + 1):
            for subset in combinations(rest, k):
                if not _dependent(m, x, action, list(subset)):
                    return False
    return True


def _dependent(m: Cbn, x: str, a: str, given: list[str]) -> bool:
    t = m.table([x, a] + given)
    by_u: dict[Assignment, dict[str, dict[str, Fraction]]] = {}
    for k, p in t.items():
        u = k.restrict(given)
        by_u.setdefault(u, {}).setdefault(k[x], {})[k[a]] = p
    for rows in by_u.values():
        pu = sum((sum(r.values()) for r in rows.values()), Fraction(0))
        if pu == 0:
            continue
        pa_u = {}
        for r in rows.values():
            for av, p in r.items():
                pa_u[av] = pa_u.get(av, Fraction(0)) + p / pu
        for r in rows.values():
            px = sum(r.values())
            if px and any(p / px != pa_u[av] for av, p in r.items()):
                return True
    return False
