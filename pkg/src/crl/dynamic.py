"""Two-slice dynamic decision networks and the POMDP machinery on top of them.

Next-slice variables are named after their current-slice counterpart with a
trailing prime (``CG`` / ``CG'``). Beliefs and observations are always keyed
by current-slice names.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from math import lcm
from typing import Iterable, Mapping

from .cbn import Cbn, Cpt
from .core import Assignment, Distribution, Role, Slice, Variable, merge, normalize
from .errors import ModelError, NotExecutable, ZeroEvidence
from .graph import CausalGraph, topo_order


def primed(name: str) -> str:
    return name + "'"


def unprimed(name: str) -> str:
    return name[:-1] if name.endswith("'") else name


@dataclass(frozen=True)
class Policy:
    """Action distribution keyed by the values of ``inputs``.

    ``kind`` is ``"full-state"`` (inputs are state variables, possibly
    latent), ``"marginal"`` (inputs are observed state variables) or
    ``"epistemic"`` (rows additionally keyed by a belief fingerprint).
    """

    name: str
    action: str
    inputs: tuple[str, ...]
    rows: Mapping[tuple, Mapping[str, Fraction]]
    kind: str = "full-state"

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "rows", {k: {str(a): Fraction(p) for a, p in r.items()} for k, r in self.rows.items()})
        for k, r in self.rows.items():
            if sum(r.values()) != 1 or any(p < 0 for p in r.values()):
                raise ModelError(f"policy {self.name}: row {k} is not a distribution")

    def dist(self, values: Mapping[str, str], belief: Distribution | None = None) -> Mapping[str, Fraction]:
        key = tuple(values[i] for i in self.inputs)
        if self.kind == "epistemic":
            key = (key, belief.fingerprint() if belief is not None else ())
        try:
            return self.rows[key]
        except KeyError:
            raise ZeroEvidence(f"policy {self.name} has no row for {key}") from None


@dataclass(frozen=True)
class Ddn:
    """A two-slice causal model with a network policy and a discount.

    ``model`` holds every mechanism: current-slice state CPTs form the
    initial distribution, the action CPT is the network policy, the reward
    CPT the reward model and next-slice state CPTs the transition model.
    """

    model: Cbn
    discount: Fraction = Fraction(1)
    policies: Mapping[str, Policy] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "discount", Fraction(self.discount))
        object.__setattr__(self, "policies", dict(self.policies))
        g = self.graph
        if not 0 < self.discount <= 1:
            raise ModelError("discount must lie in (0, 1]")
        for role in (Role.ACTION, Role.REWARD):
            for sl in (Slice.CURRENT, Slice.NEXT):
                if len(g.of_role(role, sl)) != 1:
                    raise ModelError(f"need exactly one {role.value} variable in the {sl.value} slice")
        if g.of_role(Role.BELIEF, None):
            raise ModelError("belief-role variables are not supported in dynamic models")
        for n in self.state_vars:
            if primed(n) not in g.by_name or g.var(primed(n)).slice is not Slice.NEXT:
                raise ModelError(f"state variable {n} lacks a next-slice counterpart {primed(n)}")
            if g.var(primed(n)).domain != g.var(n).domain:
                raise ModelError(f"{n} and {primed(n)} have different domains")
        for n in self.next_state_vars:
            if unprimed(n) not in self.state_vars:
                raise ModelError(f"next-slice variable {n} has no current-slice counterpart")
        for n in (self.action, self.reward):
            if g.var(primed(n)).slice is not Slice.NEXT:
                raise ModelError(f"next-slice copy of {n} must be named {primed(n)}")

    @property
    def graph(self) -> CausalGraph:
        return self.model.graph

    @cached_property
    def state_vars(self) -> tuple[str, ...]:
        return tuple(self.graph.of_role(Role.STATE, Slice.CURRENT))

    @cached_property
    def next_state_vars(self) -> tuple[str, ...]:
        return tuple(self.graph.of_role(Role.STATE, Slice.NEXT))

    @cached_property
    def action(self) -> str:
        return self.graph.of_role(Role.ACTION)[0]

    @cached_property
    def reward(self) -> str:
        return self.graph.of_role(Role.REWARD)[0]

    @cached_property
    def actions(self) -> tuple[str, ...]:
        return self.graph.var(self.action).domain

    @property
    def observed(self) -> frozenset[str]:
        """Declared observed current-slice state variables."""
        return frozenset(self.state_vars) & self.graph.observed

    def latent(self, observed: Iterable[str]) -> tuple[str, ...]:
        observed = set(observed)
        return tuple(n for n in self.state_vars if n not in observed)

    @cached_property
    def _next_order(self) -> list[str]:
        order = topo_order(self.graph)
        return [n for n in order if n in set(self.next_state_vars)]

    @cached_property
    def _current_order(self) -> list[str]:
        order = topo_order(self.graph)
        return [n for n in order if n in set(self.state_vars)]

    def cpt(self, name: str) -> Cpt:
        return self.model.cpts[name]

    # -- mechanism evaluation -------------------------------------------------

    def _p(self, name: str, value: str, values: Mapping[str, str]) -> Fraction:
        return self.model.cpts[name].prob(value, values)

    def _enumerate(self, order: list[str], given: Mapping[str, str]) -> list[tuple[Assignment, Fraction]]:
        out = []
        values = dict(given)

        def rec(i: int, p: Fraction):
            if i == len(order):
                out.append((Assignment((n, values[n]) for n in order), p))
                return
            n = order[i]
            row = self.model.cpts[n].row(values)
            for v in self.graph.var(n).domain:
                q = row[v]
                if q:
                    values[n] = v
                    rec(i + 1, p * q)
            values.pop(n, None)

        rec(0, Fraction(1))
        return out

    @cached_property
    def initial(self) -> Distribution:
        """Distribution over current-slice state assignments."""
        return Distribution(dict(self._enumerate(self._current_order, {})))

    def policy_prob(self, a: str, values: Mapping[str, str]) -> Fraction:
        """Network policy P(A = a | Pa(A))."""
        return self._p(self.action, a, values)

    def reward_dist(self, values: Mapping[str, str]) -> Mapping[str, Fraction]:
        return self.model.cpts[self.reward].row(values)

    def transition(self, state: Mapping[str, str], a: str) -> list[tuple[Assignment, Fraction]]:
        """P(s' | s, a) over next-state assignments keyed by current names."""
        given = merge(state, {self.action: a})
        key = (Assignment(given), a)
        cache = self.__dict__.setdefault("_tcache", {})
        if key not in cache:
            rename = {n: unprimed(n) for n in self.next_state_vars}
            cache[key] = [(s.rename(rename), p) for s, p in self._enumerate(self._next_order, given)]
        return cache[key]

    # -- structural checks ----------------------------------------------------

    def factorization_problems(self, observed: Iterable[str]) -> list[str]:
        """Violations of the POMDP factorization for an observation set."""
        g = self.graph
        O = set(observed)
        S = set(self.state_vars)
        Z = S - O
        Zn = {primed(z) for z in Z}
        On = {primed(o) for o in O}
        problems = []
        if not O <= S:
            problems.append(f"observed set {sorted(O - S)} contains non-state variables")

        def allow(name: str, ok: set[str]):
            bad = [p for p in g.parents(name) if p not in ok]
            if bad:
                problems.append(f"{name} has disallowed parents {bad}")

        for n in self.state_vars:
            allow(n, Z)
        allow(self.action, S)
        allow(self.reward, S | {self.action})
        for n in self.next_state_vars:
            if unprimed(n) in Z:
                allow(n, S | {self.action} | Zn)
            else:
                allow(n, O | {self.action} | Zn | On)
        return problems


# ---------------------------------------------------------------- belief operations


def _normalize_obs(m: Ddn, o: Mapping[str, str]) -> Assignment:
    return Assignment((unprimed(k), v) for k, v in o.items())


def belief_update(m: Ddn, b: Distribution, o: Mapping[str, str], a: str, o_next: Mapping[str, str]) -> Distribution:
    """b'(z') ∝ P(o' | z', o, a) · Σ_z P(z' | z, o, a) b(z)."""
    o = Assignment(o)
    o_next = _normalize_obs(m, o_next)
    latent = set(m.latent(o))
    weights: dict[Assignment, Fraction] = {}
    for z, pz in b.items():
        for nxt, p in m.transition(merge(z, o), a):
            if nxt.agrees(o_next):
                zn = nxt.restrict(latent)
                weights[zn] = weights.get(zn, Fraction(0)) + pz * p
    return normalize(weights)


def prior_belief(m: Ddn, o: Mapping[str, str]) -> Distribution:
    """P(z0 | o0) under the initial distribution."""
    latent = m.latent(o)
    w: dict[Assignment, Fraction] = {}
    for s, p in m.initial.items():
        if s.agrees(o):
            z = s.restrict(latent)
            w[z] = w.get(z, Fraction(0)) + p
    if not w:
        raise ZeroEvidence(f"observation {Assignment(o)!r} has probability zero")
    return normalize(w)


def observations(m: Ddn, observed: Iterable[str]) -> list[Assignment]:
    """Initial observations with positive probability, in domain order."""
    names = [n for n in m.state_vars if n in set(observed)]
    reach = {s.restrict(names) for s in m.initial}
    doms = [m.graph.var(n).domain for n in names]
    return [Assignment(zip(names, vals)) for vals in product(*doms) if Assignment(zip(names, vals)) in reach]


def latent_dependence(m: Ddn, p: Policy, observed: Iterable[str]) -> list[tuple[Assignment, str]]:
    """Observations at which the policy's action distribution varies with latent state."""
    observed = set(observed)
    latent = set(m.latent(observed))
    if p.kind != "full-state":
        return [(Assignment(), n) for n in p.inputs if n not in observed]
    found = []
    rows: dict[Assignment, Mapping[str, Fraction]] = {}
    flagged: set[Assignment] = set()
    for s in m.initial:
        o = s.restrict(observed)
        row = p.dist(s)
        if o in rows and rows[o] != row and o not in flagged:
            culprits = [n for n in p.inputs if n in latent]
            found.append((o, ",".join(culprits)))
            flagged.add(o)
        rows.setdefault(o, row)
    return found


def is_executable(m: Ddn, p: Policy, observed: Iterable[str] | None = None) -> bool:
    observed = m.observed if observed is None else observed
    return not latent_dependence(m, p, observed)


def marginal_policy(m: Ddn, behavioral: Policy, observed: Iterable[str]) -> Policy:
    """μ(a | o) = Σ_z P(z | o) π(a | z, o) under the initial distribution."""
    names = tuple(n for n in m.state_vars if n in set(observed))
    rows = {}
    for o in observations(m, names):
        b = prior_belief(m, o)
        mix: dict[str, Fraction] = {a: Fraction(0) for a in m.actions}
        for z, pz in b.items():
            for a, pa in behavioral.dist(merge(z, o)).items():
                mix[a] += pz * pa
        rows[tuple(o[n] for n in names)] = mix
    return Policy(f"marginal({behavioral.name})", m.action, names, rows, "marginal")


def require_executable(m: Ddn, p: Policy, observed: Iterable[str]) -> None:
    bad = latent_dependence(m, p, observed)
    if bad:
        o, culprits = bad[0]
        where = f" at {o.text()}" if o else ""
        raise NotExecutable(f"policy {p.name} depends on latent {culprits}{where}")


# ---------------------------------------------------------------- unrolling


def at(name: str, t: int) -> str:
    return f"{name}@{t}"


def unroll(m: Ddn, T: int, policy: Policy | None = None) -> Cbn:
    """Flat model over slices 0..T-1; ``policy`` replaces the network policy."""
    if T < 1:
        raise ValueError("horizon must be at least 1")
    if policy is not None and policy.kind == "epistemic":
        raise ModelError("epistemic policies cannot be unrolled into a causal model")
    g = m.graph
    variables: list[Variable] = []
    edges: set[tuple[str, str]] = set()
    cpts: dict[str, Cpt] = {}
    observed: set[str] = set()
    slice_vars = list(m.state_vars) + [m.action, m.reward]
    for t in range(T):
        for n in slice_vars:
            v = g.var(n)
            name = at(n, t)
            variables.append(Variable(name, v.domain, v.role, Slice.CURRENT))
            if n in g.observed:
                observed.add(name)
            if n == m.action and policy is not None:
                parents = tuple(at(p, t) for p in policy.inputs)
                rows = {k: dict(r) for k, r in policy.rows.items()}
                cpt = Cpt(name, parents, rows)
            elif n in m.state_vars and t > 0:
                src = m.cpt(primed(n))

                def ref(p: str, t=t) -> str:
                    return at(unprimed(p), t) if p.endswith("'") else at(p, t - 1)

                cpt = Cpt(name, tuple(ref(p) for p in src.parents), src.rows)
            else:
                src = m.cpt(n)
                cpt = Cpt(name, tuple(at(p, t) for p in src.parents), src.rows)
            cpts[name] = cpt
            edges.update((p, name) for p in cpt.parents)
    graph = CausalGraph(tuple(variables), frozenset(edges), frozenset(observed))
    return Cbn(graph, cpts)


# ---------------------------------------------------------------- simulation


@dataclass(frozen=True)
class Step:
    t: int
    state: Assignment
    observation: Assignment
    belief: Distribution
    action: str
    reward: str

    def line(self, m: Ddn) -> str:
        parts = [str(self.t)]
        parts += [f"{n}={self.state[n]}" for n in m.state_vars]
        parts += [f"{m.action}={self.action}", f"{m.reward}={self.reward}"]
        latent = [n for n in m.state_vars if n not in self.observation]
        for z, p in sorted(self.belief.items(), key=lambda kv: _index_key(m, kv[0], latent)):
            label = ",".join(f"{n}={z[n]}" for n in latent)
            parts.append(f"b[{label}]={p.numerator}/{p.denominator}" if p.denominator != 1 else f"b[{label}]={p.numerator}")
        return " ".join(parts)


def _index_key(m: Ddn, a: Assignment, names: Iterable[str]) -> tuple[int, ...]:
    return tuple(m.graph.var(n).index(a[n]) for n in names if n in a)


def _sample(rng: random.Random, dist: Iterable[tuple[object, Fraction]]):
    """Exact categorical draw: a uniform integer below the common denominator."""
    items = [(k, Fraction(p)) for k, p in dist if p]
    scale = lcm(*(p.denominator for _, p in items))
    ticket = rng.randrange(scale)
    acc = 0
    for k, p in items:
        acc += int(p * scale)
        if ticket < acc:
            return k
    raise AssertionError("probabilities do not sum to one")


def simulate(m: Ddn, policy: Policy, T: int, seed: int, observed: Iterable[str] | None = None) -> list[Step]:
    """Seeded trajectory under an executable policy.

    The generator is Python's ``random.Random`` (Mersenne Twister) seeded with
    ``seed``; every draw is an exact categorical sample.
    """
    observed = set(m.observed if observed is None else observed)
    problems = m.factorization_problems(observed)
    if problems:
        raise ModelError("; ".join(problems))
    require_executable(m, policy, observed)
    rng = random.Random(seed)
    out: list[Step] = []
    if T <= 0:
        return out
    names = [n for n in m.state_vars if n in observed]
    state = _sample(rng, m.initial.items())
    o = state.restrict(names)
    b = prior_belief(m, o)
    for t in range(T):
        a = _sample(rng, policy.dist(state, b).items())
        full = merge(state, {m.action: a})
        r = _sample(rng, m.reward_dist(full).items())
        out.append(Step(t, state, o, b, a, r))
        nxt = _sample(rng, m.transition(state, a))
        o_next = nxt.restrict(names)
        b = belief_update(m, b, o, a, o_next)
        state, o = nxt, o_next
    return out
