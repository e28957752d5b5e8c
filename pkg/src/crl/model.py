"""Compile parsed model documents into engine objects."""

from __future__ import annotations

from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Union

from .cbn import Cbn, Cpt
from .core import Role, Slice, Variable
from .dsl import ModelDoc, parse_model
from .dynamic import Ddn, Policy, primed
from .errors import ModelError
from .graph import CausalGraph
from .scm import LocalFn, Scm

Model = Union[Cbn, Scm, Ddn]

FIXTURES = (
    "online-cbn",
    "offline-cbn",
    "online-scm",
    "offline-confounded-scm",
    "offline-unconfounded-scm",
    "sports-ddn",
    "sports-ddn-unconfounded",
)


def _variables(doc: ModelDoc) -> list[Variable]:
    return [
        Variable(v.name, v.domain, Role(v.role), Slice.NEXT if v.next_slice else Slice.CURRENT)
        for v in doc.variables
    ]


def _mirror_next(doc: ModelDoc, variables: list[Variable], edges: set, cpts: dict) -> None:
    """Derive next-slice action/reward copies from the current-slice mechanisms."""
    by = {v.name: v for v in variables}
    for role in (Role.ACTION, Role.REWARD):
        current = [v for v in variables if v.role is role and v.slice is Slice.CURRENT]
        if len(current) != 1:
            continue
        src = current[0]
        name = primed(src.name)
        if name in cpts:
            continue
        if name not in by:
            v = Variable(name, src.domain, role, Slice.NEXT)
            variables.append(v)
            by[name] = v
        parents = cpts[src.name].parents
        mirrored = {(primed(p), name) for p in parents}
        declared = {e for e in edges if e[1] == name}
        if declared and declared != mirrored:
            raise ModelError(f"edges into {name} must mirror those into {src.name}")
        for p, _ in mirrored:
            if p not in by:
                raise ModelError(f"cannot mirror {src.name}: {p} is not declared")
        edges |= mirrored
        cpts[name] = Cpt(name, tuple(primed(p) for p in parents), cpts[src.name].rows)


def build(doc: ModelDoc) -> Model:
    variables = _variables(doc)
    by = {v.name: v for v in variables}
    edges = set(doc.edges)
    observed = {v.name for v in doc.variables if not v.latent}
    parents = {v.name: tuple(p for p, c in doc.edges if c == v.name) for v in doc.variables}

    if doc.kind == "scm":
        fns, prior = {}, {}
        for p in doc.priors:
            prior[p.name] = dict(zip(by[p.name].domain, p.probs))
        for e in doc.eqns:
            ps = tuple(by[n] for n in sorted(parents[e.child], key=[v.name for v in variables].index))
            fns[e.child] = LocalFn.compile(by[e.child], ps, e.expr)
        for c in doc.cpts:
            dom = by[c.child].domain
            if not c.parents:
                prior[c.child] = dict(zip(dom, c.rows[0][1]))
            else:
                fns[c.child] = LocalFn(c.child, c.parents, {k: dom[list(ps).index(1)] for k, ps in c.rows})
        graph = CausalGraph(tuple(variables), frozenset(edges), frozenset(observed))
        return Scm(graph, fns, prior)

    cpts: dict[str, Cpt] = {}
    for p in doc.priors:
        cpts[p.name] = Cpt.prior(by[p.name], p.probs)
    for c in doc.cpts:
        dom = by[c.child].domain
        cpts[c.child] = Cpt(c.child, c.parents, {k: dict(zip(dom, ps)) for k, ps in c.rows})
    for e in doc.eqns:
        ps = tuple(by[n] for n in sorted(parents[e.child], key=[v.name for v in variables].index))
        fn = LocalFn.compile(by[e.child], ps, e.expr)
        cpts[e.child] = Cpt.deterministic(by[e.child], ps, fn)

    if doc.kind == "cbn":
        graph = CausalGraph(tuple(variables), frozenset(edges), frozenset(observed))
        return Cbn(graph, cpts)

    _mirror_next(doc, variables, edges, cpts)
    graph = CausalGraph(tuple(variables), frozenset(edges), frozenset(observed))
    model = Cbn(graph, cpts)
    action = [v.name for v in variables if v.role is Role.ACTION and v.slice is Slice.CURRENT]
    policies = {}
    for p in doc.policies:
        dom = by[action[0]].domain
        policies[p.name] = Policy(p.name, action[0], p.inputs, {k: dict(zip(dom, ps)) for k, ps in p.rows})
    discount = doc.discount if doc.discount is not None else Fraction(1)
    return Ddn(model, discount, policies, doc.name)


def fixture_text(name: str) -> str:
    return resources.files("crl").joinpath("fixtures", f"{name}.crl").read_text(encoding="utf-8")


def load_text(source: str) -> str:
    """Text of a fixture name or a model file path."""
    if source in FIXTURES:
        return fixture_text(source)
    return Path(source).read_text(encoding="utf-8")


def load(source: str) -> Model:
    return build(parse_model(load_text(source)))
