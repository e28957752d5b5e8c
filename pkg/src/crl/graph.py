"""Causal DAGs over role-tagged variables and the graphical checks built on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .core import Role, Slice, Variable
from .errors import CycleDetected, ModelError, UnknownVariable


@dataclass(frozen=True)
class CausalGraph:
    """A DAG with an observed/latent partition.

    Parameters
    ----------
    variables : sequence of Variable
        Declaration order is used to break ties in :func:`topo_order`.
    edges : iterable of (parent, child) name pairs
    observed : iterable of names
        Everything else is latent.
    """

    variables: tuple[Variable, ...]
    edges: frozenset[tuple[str, str]]
    observed: frozenset[str] = field(default=frozenset())

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "edges", frozenset(self.edges))
        object.__setattr__(self, "observed", frozenset(self.observed))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ModelError("duplicate variable names")
        known = set(names)
        for p, c in self.edges:
            for n in (p, c):
                if n not in known:
                    raise UnknownVariable(n)
            if p == c:
                raise CycleDetected([p, p])
        for n in self.observed:
            if n not in known:
                raise UnknownVariable(n)
        topo_order(self)

    @cached_property
    def by_name(self) -> dict[str, Variable]:
        return {v.name: v for v in self.variables}

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @cached_property
    def _parents(self) -> dict[str, tuple[str, ...]]:
        pos = {n: i for i, n in enumerate(self.names)}
        out: dict[str, list[str]] = {n: [] for n in self.names}
        for p, c in self.edges:
            out[c].append(p)
        return {n: tuple(sorted(ps, key=pos.__getitem__)) for n, ps in out.items()}

    @cached_property
    def _children(self) -> dict[str, tuple[str, ...]]:
        pos = {n: i for i, n in enumerate(self.names)}
        out: dict[str, list[str]] = {n: [] for n in self.names}
        for p, c in self.edges:
            out[p].append(c)
        return {n: tuple(sorted(cs, key=pos.__getitem__)) for n, cs in out.items()}

    def var(self, name: str) -> Variable:
        try:
            return self.by_name[name]
        except KeyError:
            raise UnknownVariable(name) from None

    def parents(self, name: str) -> tuple[str, ...]:
        self.var(name)
        return self._parents[name]

    def children(self, name: str) -> tuple[str, ...]:
        self.var(name)
        return self._children[name]

    def sources(self) -> tuple[str, ...]:
        return tuple(n for n in self.names if not self._parents[n])

    def latent(self) -> frozenset[str]:
        return frozenset(self.names) - self.observed

    def descendants(self, names: Iterable[str]) -> set[str]:
        """Proper and improper descendants (includes ``names`` themselves)."""
        stack = list(names)
        seen = set(stack)
        while stack:
            for c in self._children[stack.pop()]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen

    def ancestors(self, names: Iterable[str]) -> set[str]:
        stack = list(names)
        seen = set(stack)
        while stack:
            for p in self._parents[stack.pop()]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def with_edges(self, edges: Iterable[tuple[str, str]]) -> "CausalGraph":
        return CausalGraph(self.variables, frozenset(edges), self.observed)

    def with_observed(self, observed: Iterable[str]) -> "CausalGraph":
        return CausalGraph(self.variables, self.edges, frozenset(observed))

    def of_role(self, role: Role, slice_: Slice | None = Slice.CURRENT) -> list[str]:
        return [v.name for v in self.variables if v.role is role and (slice_ is None or v.slice is slice_)]


def topo_order(g: CausalGraph) -> list[str]:
    """Kahn's algorithm, always emitting the earliest-declared ready variable."""
    names = [v.name for v in g.variables]
    indeg = {n: 0 for n in names}
    kids: dict[str, list[str]] = {n: [] for n in names}
    for p, c in g.edges:
        indeg[c] += 1
        kids[p].append(c)
    pos = {n: i for i, n in enumerate(names)}
    ready = sorted((n for n in names if indeg[n] == 0), key=pos.__getitem__)
    out = []
    while ready:
        n = ready.pop(0)
        out.append(n)
        for c in kids[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
        ready.sort(key=pos.__getitem__)
    if len(out) != len(names):
        raise CycleDetected(_find_cycle(names, kids))
    return out


def _find_cycle(names: list[str], kids: dict[str, list[str]]) -> list[str]:
    color = {n: 0 for n in names}
    path: list[str] = []

    def visit(n):
        color[n] = 1
        path.append(n)
        for c in kids[n]:
            if color[c] == 1:
                return path[path.index(c):] + [c]
            if color[c] == 0:
                found = visit(c)
                if found:
                    return found
        color[n] = 2
        path.pop()
        return None

    for n in names:
        if color[n] == 0:
            found = visit(n)
            if found:
                return found
    return []


def _check(g: CausalGraph, names: Iterable[str]) -> set[str]:
    names = set(names)
    for n in names:
        g.var(n)
    return names


def d_separated(g: CausalGraph, X: Iterable[str], Y: Iterable[str], Z: Iterable[str]) -> bool:
    """Reachability test: is any node of Y reachable from X by an active trail given Z?"""
    X, Y, Z = _check(g, X), _check(g, Y), _check(g, Z)
    if (X & Y) or (X & Z) or (Y & Z):
        raise ValueError("X, Y, Z must be pairwise disjoint")
    anc_z = g.ancestors(Z)
    # (node, direction): "up" means we arrived from a child, "down" from a parent
    frontier = [(x, "up") for x in X]
    visited = set()
    while frontier:
        node, direction = frontier.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node not in Z and node in Y:
            return False
        if direction == "up" and node not in Z:
            frontier.extend((p, "up") for p in g.parents(node))
            frontier.extend((c, "down") for c in g.children(node))
        elif direction == "down":
            if node not in Z:
                frontier.extend((c, "down") for c in g.children(node))
            if node in anc_z:
                frontier.extend((p, "up") for p in g.parents(node))
    return True


def _action_parents(g: CausalGraph, action: str) -> tuple[str, ...]:
    v = g.var(action)
    if v.role is not Role.ACTION:
        raise ModelError(f"{action} is not an action variable")
    return g.parents(action)


def latent_action_parents(g: CausalGraph, action: str) -> list[str]:
    return [p for p in _action_parents(g, action) if p not in g.observed and g.var(p).role is not Role.BELIEF]


def is_action_sufficient_cbn(g: CausalGraph, action: str) -> bool:
    return not latent_action_parents(g, action)


def is_action_sufficient_scm(g: CausalGraph, action: str) -> bool:
    return all(g.children(p) == (action,) for p in latent_action_parents(g, action))


@dataclass(frozen=True)
class DdnConstraintReport:
    next_to_current: tuple[tuple[str, str], ...]
    reward_out: tuple[tuple[str, str], ...]
    action_to_state: tuple[tuple[str, str], ...]

    def passed(self, relax_a3: bool = False) -> bool:
        return not self.next_to_current and not self.reward_out and (relax_a3 or not self.action_to_state)

    def lines(self, relax_a3: bool = False) -> list[str]:
        def fmt(edges):
            return "pass" if not edges else "fail " + " ".join(f"{p}->{c}" for p, c in edges)

        third = fmt(self.action_to_state)
        if relax_a3 and self.action_to_state:
            third += " (relaxed)"
        return [
            f"no next-to-current edges: {fmt(self.next_to_current)}",
            f"no reward edges within slice: {fmt(self.reward_out)}",
            f"no action edges to same-slice non-reward variables: {third}",
        ]


def check_ddn_constraints(g: CausalGraph) -> DdnConstraintReport:
    by = g.by_name
    first, second, third = [], [], []
    for p, c in sorted(g.edges):
        vp, vc = by[p], by[c]
        if vp.slice is Slice.NEXT and vc.slice is Slice.CURRENT:
            first.append((p, c))
        if vp.slice is vc.slice:
            if vp.role is Role.REWARD:
                second.append((p, c))
            if vp.role is Role.ACTION and vc.role is not Role.REWARD:
                third.append((p, c))
    return DdnConstraintReport(tuple(first), tuple(second), tuple(third))


def next_state_vars(g: CausalGraph) -> list[str]:
    return [v.name for v in g.variables if v.slice is Slice.NEXT and v.role is Role.STATE]


def conditionally_irrelevant(g: CausalGraph, s: str, action: str) -> bool:
    g.var(s)
    cond = {action} | set(g.parents(action))
    if s in cond:
        return False
    targets = set(g.of_role(Role.REWARD)) | set(next_state_vars(g))
    targets -= cond | {s}
    if not targets:
        return True
    return d_separated(g, {s}, targets, cond)


def satisfies_backdoor(g: CausalGraph, action: str, target: str, adj: Iterable[str]) -> bool:
    adj = _check(g, adj)
    g.var(action)
    g.var(target)
    if adj & {action, target}:
        raise ValueError("adjustment set must exclude action and target")
    if adj & (g.descendants([action]) - {action}):
        return False
    cut = g.with_edges((p, c) for p, c in g.edges if p != action)
    return d_separated(cut, {action}, {target}, adj)
