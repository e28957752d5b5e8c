"""Seeded random models for property tests.

Probabilities use small denominators so exact arithmetic stays cheap. The
dynamic generator keeps belief closures finite: latent state persists or is
redrawn from a fixed prior, and observed successors are either stochastic
functions of observed state and action or deterministic functions that may
read persistent latent state.
"""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import product

from crl.cbn import Cbn, Cpt
from crl.core import Role, Slice, Variable
from crl.dynamic import Ddn, Policy, primed
from crl.graph import CausalGraph

DENOMINATORS = (1, 2, 3, 4)


def random_row(rng: random.Random, card: int, deterministic: bool = False, positive: bool = False) -> list[Fraction]:
    if deterministic:
        row = [Fraction(0)] * card
        row[rng.randrange(card)] = Fraction(1)
        return row
    d = rng.choice(DENOMINATORS[1:] if positive else DENOMINATORS)
    if positive:
        d = max(d, card)
        counts = [1] * card
        for _ in range(d - card):
            counts[rng.randrange(card)] += 1
    else:
        counts = [0] * card
        for _ in range(d):
            counts[rng.randrange(card)] += 1
    return [Fraction(c, d) for c in counts]


def random_cpt(rng, child: Variable, parents: list[Variable], deterministic=False, positive=False) -> Cpt:
    rows = {}
    for config in product(*(p.domain for p in parents)):
        rows[config] = dict(zip(child.domain, random_row(rng, child.card, deterministic, positive)))
    return Cpt(child.name, tuple(p.name for p in parents), rows)


def random_dag(rng, n: int, p: float = 0.4, max_parents: int = 3) -> list[tuple[int, int]]:
    edges = []
    for j in range(n):
        cands = [i for i in range(j) if rng.random() < p]
        rng.shuffle(cands)
        edges.extend((i, j) for i in cands[:max_parents])
    return edges


def random_cbn(rng, n: int | None = None, max_card: int = 2, p: float = 0.45, positive: bool = False, observed_p: float = 0.6) -> Cbn:
    n = n or rng.randint(2, 5)
    variables = [Variable(f"V{i}", tuple(str(k) for k in range(rng.randint(2, max_card)))) for i in range(n)]
    edges = random_dag(rng, n, p)
    parents = {j: [variables[i] for i, c in edges if c == j] for j in range(n)}
    cpts = {v.name: random_cpt(rng, v, parents[j], deterministic=rng.random() < 0.15, positive=positive) for j, v in enumerate(variables)}
    observed = {v.name for v in variables if rng.random() < observed_p}
    graph = CausalGraph(tuple(variables), frozenset((variables[i].name, variables[j].name) for i, j in edges), frozenset(observed))
    return Cbn(graph, cpts)


def random_ddn(
    rng,
    n_state: int | None = None,
    sufficient: bool = True,
    private_noise: bool = False,
    confounded: bool = False,
    discount: Fraction | None = None,
) -> tuple[Ddn, Policy, list[str]]:
    """A two-slice model, an observation-level policy and the observation set.

    ``sufficient`` restricts the action's parents to observed state.
    ``private_noise`` adds a latent variable whose only child is the action.
    ``confounded`` makes a latent state variable a parent of both the action
    and the reward.
    """
    n_state = n_state or rng.randint(1, 3)
    binary = ("0", "1")
    names = [f"S{i}" for i in range(n_state)]
    obs = [n for n in names if rng.random() < 0.5]
    if not obs:
        obs = [names[0]]
    latent = [n for n in names if n not in obs]
    if confounded and not latent:
        latent.append(f"S{n_state}")
        names.append(latent[-1])
    noise = "N" if private_noise else None
    state = names + ([noise] if noise else [])

    cur = {n: Variable(n, binary, Role.STATE, Slice.CURRENT) for n in state}
    nxt = {n: Variable(primed(n), binary, Role.STATE, Slice.NEXT) for n in state}
    A = Variable("A", binary, Role.ACTION)
    R = Variable("R", tuple(rng.choice([("0", "1"), ("0", "1", "2"), ("-1", "0", "1")])), Role.REWARD)
    A2 = Variable("A'", binary, Role.ACTION, Slice.NEXT)
    R2 = Variable("R'", R.domain, Role.REWARD, Slice.NEXT)

    cpts: dict[str, Cpt] = {}
    parents: dict[str, list[Variable]] = {}
    for i, n in enumerate(state):
        if n == noise:
            ps = []
        elif n in latent:
            ps = [cur[z] for z in latent[: latent.index(n)] if rng.random() < 0.4]
        else:
            ps = [cur[z] for z in latent if rng.random() < 0.5]
        parents[n] = ps
        cpts[n] = random_cpt(rng, cur[n], ps)

    if sufficient:
        a_par = [cur[o] for o in obs if rng.random() < 0.7]
    else:
        a_par = [cur[s] for s in names if rng.random() < 0.5]
    if confounded:
        z = rng.choice(latent)
        if cur[z] not in a_par:
            a_par.append(cur[z])
    if noise:
        a_par.append(cur[noise])
    a_par.sort(key=lambda v: state.index(v.name))
    cpts["A"] = random_cpt(rng, A, a_par)

    r_par = [cur[s] for s in names if rng.random() < 0.5] + [A]
    if confounded:
        for v in a_par:
            if v.name in latent and v not in r_par:
                r_par.insert(0, v)
    cpts["R"] = random_cpt(rng, R, r_par)

    persistent = []
    for n in state:
        if n == noise:
            cpts[primed(n)] = random_cpt(rng, nxt[n], [])
        elif n in latent:
            if rng.random() < 0.75:
                cpts[primed(n)] = Cpt.deterministic(nxt[n], [cur[n]], lambda vals, n=n: vals[n])
                persistent.append(n)
            else:
                cpts[primed(n)] = random_cpt(rng, nxt[n], [])
        else:
            if rng.random() < 0.5:
                ps = [cur[o] for o in obs if rng.random() < 0.5] + ([A] if rng.random() < 0.7 else [])
                cpts[primed(n)] = random_cpt(rng, nxt[n], ps)
            else:
                ps = [cur[o] for o in obs if rng.random() < 0.5] + [nxt[z] for z in persistent if rng.random() < 0.6]
                ps += [A] if rng.random() < 0.5 else []
                cpts[primed(n)] = random_cpt(rng, nxt[n], ps, deterministic=True)
    cpts["A'"] = Cpt("A'", tuple(primed(p) for p in cpts["A"].parents), cpts["A"].rows)
    cpts["R'"] = Cpt("R'", tuple(primed(p) if p != "A" else "A'" for p in cpts["R"].parents), cpts["R"].rows)

    variables = [cur[n] for n in state] + [A, R] + [nxt[n] for n in state] + [A2, R2]
    edges = {(p, c) for c, cpt in cpts.items() for p in cpt.parents}
    observed = set(obs) | {primed(o) for o in obs} | {"A", "R", "A'", "R'"}
    graph = CausalGraph(tuple(variables), frozenset(edges), frozenset(observed))
    model = Cbn(graph, cpts)
    rows = {config: dict(zip(binary, random_row(rng, 2))) for config in product(binary, repeat=len(obs))}
    policy = Policy("pi", "A", tuple(obs), rows, "marginal")
    if discount is None:
        discount = rng.choice([Fraction(1, 2), Fraction(2, 3), Fraction(9, 10)])
    return Ddn(model, discount, {"pi": policy}, "random"), policy, list(obs)


def with_action(m: Cbn, name: str) -> Cbn:
    """The same network with ``name`` re-tagged as the action variable."""
    variables = tuple(Variable(v.name, v.domain, Role.ACTION) if v.name == name else v for v in m.graph.variables)
    return Cbn(CausalGraph(variables, m.graph.edges, m.graph.observed), m.cpts)


def random_scm(rng, n: int | None = None, noise_p: float = 0.6, observed_p: float = 0.6, sufficient: bool = True, confounded: bool = False):
    """Binary endogenous V0..Vn-1 with deterministic random mechanisms.

    Roots get a random prior; other variables get a private binary noise
    source with probability ``noise_p``. One variable, ``model.action``, is
    tagged as the action and always has a private noise source. With
    ``sufficient`` its endogenous parents are observed; ``confounded`` adds a
    latent source feeding both the action and one of its descendants.
    Returns the model and the action name.
    """
    from crl.scm import LocalFn, Scm

    n = n or rng.randint(2, 5)
    binary = ("0", "1")
    names = [f"V{i}" for i in range(n)]
    action = names[rng.randrange(n - 1)]
    edges = [(names[i], names[j]) for i, j in random_dag(rng, n, 0.5)]
    if not any(p == action for p, _ in edges):
        edges.append((action, names[-1]))
    parents = {c: [p for p, q in edges if q == c] for c in names}
    observed = {c for c in names if rng.random() < observed_p}
    if sufficient:
        observed |= set(parents[action])
    variables, fns, prior = [], {}, {}

    def source(name):
        variables.append(Variable(name, binary))
        prior[name] = dict(zip(binary, random_row(rng, 2)))

    if confounded:
        source("C")
        kids = sorted(set(names[names.index(action) + 1:]))
        parents[action].append("C")
        parents[rng.choice(kids)].append("C")
    for c in names:
        extra = []
        if c == action or (parents[c] and rng.random() < noise_p):
            source(f"U_{c}")
            extra = [f"U_{c}"]
        variables.append(Variable(c, binary, Role.ACTION if c == action else Role.STATE))
        ps = parents[c] + extra
        if not ps:
            prior[c] = dict(zip(binary, random_row(rng, 2)))
            continue
        table = {vals: rng.choice(binary) for vals in product(binary, repeat=len(ps))}
        fns[c] = LocalFn(c, tuple(ps), table)
    all_edges = {(p, c) for c in names for p in (parents[c] + ([f"U_{c}"] if f"U_{c}" in prior else []))}
    graph = CausalGraph(tuple(variables), frozenset(all_edges), frozenset(observed))
    return Scm(graph, fns, prior), action


# ---------------------------------------------------------------- model documents

_NAMES = ("X", "Y", "Zed", "a_1", "B2", "Q_q")
_VALUES = ("0", "1", "2", "-1", "lo", "hi", "mid", "3/2")


def _rows(rng, doms, width, deterministic=False):
    rows = []
    for config in product(*doms):
        rows.append((config, tuple(random_row(rng, width, deterministic))))
    return tuple(rows)


def _bool_expr(rng, names, depth=0):
    from crl.expr import BinOp, Num, Ref

    if depth > 2 or rng.random() < 0.35:
        return Ref(rng.choice(names))
    k = rng.randrange(3)
    a = _bool_expr(rng, names, depth + 1)
    if k == 0:
        return BinOp("-", Num(Fraction(1)), a)
    b = _bool_expr(rng, names, depth + 1)
    if k == 1:
        return BinOp("*", a, b)
    return BinOp("-", BinOp("+", a, b), BinOp("*", a, b))


def random_doc(rng):
    """A valid model document of a random kind."""
    from crl.dsl import CptDecl, EqnDecl, ModelDoc, PriorDecl, VarDecl

    kind = rng.choice(("cbn", "scm", "ddn"))
    title = rng.choice(("m", "sports model", "t-1", ""))
    if kind == "ddn":
        return _random_ddn_doc(rng, title)
    n = rng.randint(1, 4)
    names = [f"{rng.choice(_NAMES)}{i}" for i in range(n)]
    binary = kind == "scm"
    doms = {}
    variables = []
    for i, nm in enumerate(names):
        dom = ("0", "1") if binary else tuple(rng.sample(_VALUES, rng.randint(2, 3)))
        doms[nm] = dom
        role = rng.choice(("state", "state", "action", "reward", "belief"))
        variables.append(VarDecl(nm, dom, role, rng.random() < 0.3))
    edges = [(names[i], names[j]) for i, j in random_dag(rng, n, 0.5)]
    parents = {c: tuple(p for p, q in edges if q == c) for c in names}
    cpts, eqns, priors = [], [], []
    for nm in names:
        ps = parents[nm]
        if not ps:
            priors.append(PriorDecl(nm, tuple(random_row(rng, len(doms[nm])))))
        elif kind == "scm" and rng.random() < 0.5:
            eqns.append(EqnDecl(nm, _bool_expr(rng, list(ps))))
        else:
            cpts.append(CptDecl(nm, ps, _rows(rng, [doms[p] for p in ps], len(doms[nm]), kind == "scm")))
    return ModelDoc(kind, title, tuple(variables), tuple(edges), tuple(cpts), tuple(eqns), tuple(priors))


def _random_ddn_doc(rng, title):
    from crl.dsl import CptDecl, ModelDoc, PolicyDecl, PriorDecl, VarDecl

    k = rng.randint(1, 3)
    state = [f"S{i}" for i in range(k)]
    latent = {s for s in state if rng.random() < 0.4}
    variables = [VarDecl(s, ("0", "1"), "state", s in latent) for s in state]
    r_dom = tuple(rng.choice([("0", "1"), ("-1", "0", "1")]))
    variables += [VarDecl("A", ("0", "1"), "action"), VarDecl("R", r_dom, "reward")]
    variables += [VarDecl(s + "'", ("0", "1"), "state", s in latent, True) for s in state]
    obs = [s for s in state if s not in latent]
    edges = []
    a_par = [s for s in state if rng.random() < 0.5]
    r_par = [s for s in state if rng.random() < 0.5] + ["A"]
    edges += [(p, "A") for p in a_par] + [(p, "R") for p in r_par]
    n_par = {}
    for s in state:
        ps = [s] + (["A"] if rng.random() < 0.5 else [])
        n_par[s + "'"] = ps
        edges += [(p, s + "'") for p in ps]
    cpts, priors = [], []
    for s in state:
        priors.append(PriorDecl(s, tuple(random_row(rng, 2))))
    dom = {v.name: v.domain for v in variables}
    for child, ps in [("A", a_par), ("R", r_par)] + list(n_par.items()):
        if ps:
            cpts.append(CptDecl(child, tuple(ps), _rows(rng, [dom[p] for p in ps], len(dom[child]))))
        else:
            priors.append(PriorDecl(child, tuple(random_row(rng, len(dom[child])))))
    policies = []
    for i in range(rng.randint(0, 2)):
        ins = tuple(s for s in obs if rng.random() < 0.7)
        policies.append(PolicyDecl(f"pi{i}", ins, _rows(rng, [("0", "1")] * len(ins), 2)))
    discount = rng.choice([Fraction(1), Fraction(9, 10), Fraction(1, 2)])
    return ModelDoc("ddn", title, tuple(variables), tuple(edges), tuple(cpts), (), tuple(priors), tuple(policies), discount)
