"""Policy evaluation over epistemic states.

An epistemic state pairs the current observation with an exact belief over
the latent state variables. Evaluation builds the closure of states reachable
from the roots under every action, then solves the Bellman system of the
requested mode exactly.

Modes
-----
conditional
    Rewards and successor observations use the posterior over latents given
    the chosen action under the behavioral (network) policy.
interventional
    The action is set by intervention; the belief is used as is.
whatif / hindsight
    Root states carry extra evidence (the observed act, or realized outcomes).
    The first step is a counterfactual in the one-step structural model:
    abduce on observation plus evidence, intervene on the action, predict.
    Later steps carry no extra evidence and are interventional.
"""

from __future__ import annotations

import enum
import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Sequence

from . import linalg
from .cbn import Cbn, Cpt
from .core import Assignment, Distribution, magnitude, merge, normalize
from .dynamic import (
    Ddn,
    Policy,
    belief_update,
    observations,
    prior_belief,
    primed,
    require_executable,
    unprimed,
)
from .errors import ClosureTooLarge, ModelError, Unsolvable, UnsupportedQuery, ZeroEvidence, ZeroMass
from .graph import CausalGraph
from .scm import Scm, abduct, from_cbn, predict, twin_predict

DEFAULT_GUARD = 10_000


class Mode(enum.Enum):
    CONDITIONAL = "conditional"
    INTERVENTIONAL = "interventional"
    WHATIF = "whatif"
    HINDSIGHT = "hindsight"

    @property
    def counterfactual(self) -> bool:
        return self in (Mode.WHATIF, Mode.HINDSIGHT)


@dataclass(frozen=True)
class EpistemicState:
    observation: Assignment
    belief: Distribution
    extra: Assignment = field(default_factory=Assignment)

    def __post_init__(self):
        object.__setattr__(self, "observation", Assignment(self.observation))
        object.__setattr__(self, "extra", Assignment(self.extra))

    def stripped(self) -> "EpistemicState":
        return EpistemicState(self.observation, self.belief)

    def key(self, order: Sequence[str] = ()) -> str:
        rank = {n: i for i, n in enumerate(order)}

        def names(a: Mapping[str, str]) -> list[str]:
            return sorted(a, key=lambda n: (rank.get(unprimed(n), len(rank)), n))

        obs = ",".join(f"{n}={self.observation[n]}" for n in names(self.observation))
        if self.extra:
            obs += "; " + ",".join(f"{n}={self.extra[n]}" for n in names(self.extra))
        parts = []
        entries = sorted(self.belief.items(), key=lambda kv: tuple(_sort_value(kv[0][n]) for n in names(kv[0])))
        for z, p in entries:
            label = ",".join(f"{n}={z[n]}" for n in names(z))
            parts.append(f"{label}:{fraction_text(p)}" if label else fraction_text(p))
        return f"<{obs} | b{{{'; '.join(parts)}}}>"


def _sort_value(v: str) -> tuple:
    try:
        return (0, Fraction(v), "")
    except (ValueError, ZeroDivisionError):
        return (1, Fraction(0), v)


def fraction_text(p: Fraction) -> str:
    return str(p.numerator) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"


def decimal_text(p: Fraction, digits: int) -> str:
    scaled = round(p * 10**digits)
    sign = "-" if scaled < 0 else ""
    whole, frac = divmod(abs(scaled), 10**digits)
    return f"{sign}{whole}.{frac:0{digits}d}" if digits else f"{sign}{whole}"


@dataclass
class ValueReport:
    """Exact V and Q over a closed set of epistemic states."""

    mode: Mode
    solver: str
    action: str
    actions: tuple[str, ...]
    order: tuple[str, ...]
    states: list[EpistemicState]
    roots: list[EpistemicState]
    policy: dict[EpistemicState, Mapping[str, Fraction]]
    rewards: dict[tuple[EpistemicState, str], Fraction]
    transitions: dict[tuple[EpistemicState, str], list[tuple[EpistemicState, Fraction]]]
    V: dict[EpistemicState, Fraction]
    Q: dict[tuple[EpistemicState, str], Fraction]
    gamma: Fraction
    residual: Fraction = Fraction(0)

    def key(self, s: EpistemicState) -> str:
        return s.key(self.order)

    def find(self, observation: Mapping[str, str], belief: Distribution | None = None, extra: Mapping[str, str] | None = None) -> EpistemicState:
        o = Assignment(observation)
        hits = [
            s
            for s in self.states
            if s.observation == o
            and (belief is None or s.belief == belief)
            and (s.extra == Assignment(extra) if extra is not None else True)
        ]
        if extra is None and len(hits) > 1:
            roots = [s for s in hits if s in set(self.roots)]
            hits = roots or hits
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} states match observation {o!r}")
        return hits[0]

    def value(self, observation: Mapping[str, str], belief: Distribution | None = None, extra: Mapping[str, str] | None = None) -> Fraction:
        return self.V[self.find(observation, belief, extra)]

    def q(self, observation: Mapping[str, str], a: str, belief: Distribution | None = None, extra: Mapping[str, str] | None = None) -> Fraction:
        return self.Q[self.find(observation, belief, extra), str(a)]

    def bellman_residual(self) -> Fraction:
        worst = Fraction(0)
        for s in self.states:
            for a in self.actions:
                back = self.rewards[s, a] + self.gamma * sum(
                    (p * self.V[t] for t, p in self.transitions[s, a]), Fraction(0)
                )
                worst = max(worst, abs(self.Q[s, a] - back))
            mix = sum((self.policy[s].get(a, Fraction(0)) * self.Q[s, a] for a in self.actions), Fraction(0))
            worst = max(worst, abs(self.V[s] - mix))
        return worst

    def rows(self) -> list[tuple[str, str, Fraction]]:
        out = []
        for s in self.states:
            k = self.key(s)
            out.append((k, "V", self.V[s]))
            for a in self.actions:
                out.append((k, f"{self.action}={a}", self.Q[s, a]))
        return out

    def table(self, decimal: int | None = None) -> str:
        def fmt(p: Fraction) -> str:
            return fraction_text(p) if decimal is None else f"{fraction_text(p)}\t{decimal_text(p, decimal)}"

        return "\n".join(f"{self.mode.value}\t{k}\t{label}\t{fmt(v)}" for k, label, v in self.rows())

    def to_json(self) -> str:
        data = {
            "mode": self.mode.value,
            "solver": self.solver,
            "gamma": fraction_text(self.gamma),
            "roots": [self.key(s) for s in self.roots],
            "rows": [{"state": k, "entry": label, "value": fraction_text(v)} for k, label, v in self.rows()],
        }
        return json.dumps(data, indent=2)


# ---------------------------------------------------------------- one-step models


def _one_step_cbn(m: Ddn) -> Cbn:
    """Single-step network with current-slice state as uniform roots."""
    cache = m.__dict__.setdefault("_one_step", {})
    if "cbn" not in cache:
        g = m.graph
        keep = set(m.state_vars) | {m.action, m.reward} | set(m.next_state_vars)
        variables = tuple(v for v in g.variables if v.name in keep)
        edges = frozenset((p, c) for p, c in g.edges if p in keep and c in keep and c not in m.state_vars)
        cpts = {}
        for v in variables:
            if v.name in m.state_vars:
                cpts[v.name] = Cpt.prior(v, [Fraction(1, v.card)] * v.card)
            else:
                cpts[v.name] = m.model.cpts[v.name]
        cache["cbn"] = Cbn(CausalGraph(variables, edges, g.observed & keep), cpts)
    return cache["cbn"]


def _one_step_scm(m: Ddn) -> Scm:
    cache = m.__dict__.setdefault("_one_step", {})
    if "scm" not in cache:
        cache["scm"] = from_cbn(_one_step_cbn(m))
    return cache["scm"]


def _factual_worlds(m: Ddn, s: EpistemicState, evidence: Mapping[str, str]) -> dict[Assignment, Fraction]:
    """Unnormalized one-step worlds consistent with the state and ``evidence``."""
    order = [n for n in _one_step_cbn(m).order if n not in m.state_vars]
    out: dict[Assignment, Fraction] = {}
    for z, pz in s.belief.items():
        base = merge(z, s.observation)
        for w, p in m._enumerate(order, base):
            full = merge(base, w)
            if full.agrees(evidence):
                out[full] = out.get(full, Fraction(0)) + pz * p
    return out

def _expected_reward(m: Ddn, full: Mapping[str, str]) -> Fraction:
    return sum((magnitude(r) * p for r, p in m.reward_dist(full).items()), Fraction(0))


def _posterior(m: Ddn, s: EpistemicState, a: str, mode: Mode) -> Distribution:
    if mode is not Mode.CONDITIONAL:
        return s.belief
    w = {z: pz * m.policy_prob(a, merge(z, s.observation)) for z, pz in s.belief.items()}
    try:
        return normalize(w)
    except ZeroMass:
        # likelihood is zero everywhere, hence constant, and cancels
        return s.belief


def _step(m: Ddn, s: EpistemicState, a: str, mode: Mode, obs_names: list[str]):
    """Expected reward and successor epistemic states with probabilities."""
    post = _posterior(m, s, a, mode)
    reward = Fraction(0)
    by_obs: dict[Assignment, Fraction] = {}
    for z, pz in post.items():
        full = merge(z, s.observation)
        reward += pz * _expected_reward(m, merge(full, {m.action: a}))
        for nxt, p in m.transition(full, a):
            o2 = nxt.restrict(obs_names)
            by_obs[o2] = by_obs.get(o2, Fraction(0)) + pz * p
    succ = []
    for o2 in sorted(by_obs, key=lambda o: _index_key(m, o)):
        b2 = belief_update(m, s.belief, s.observation, a, o2)
        succ.append((EpistemicState(o2, b2), by_obs[o2]))
    return reward, succ


def _counterfactual_step(m: Ddn, s: EpistemicState, a: str, obs_names: list[str], route: str = "twin"):
    """First step of a counterfactual root: abduce, intervene on the action, predict.

    ``route="twin"`` propagates factual worlds through the canonical
    mechanisms directly; ``route="scm"`` enumerates the response-function
    SCM. Both give the same distribution.
    """
    if route == "twin":
        weights = _factual_worlds(m, s, s.extra)
        if not weights:
            raise ZeroEvidence(f"evidence {s.extra!r} has probability zero at {s.observation!r}")
        world = twin_predict(_one_step_cbn(m), normalize(weights), {m.action: a})
    elif route == "scm":
        scm = _one_step_scm(m)
        prior = Distribution({merge(z, s.observation): p for z, p in s.belief.items()})
        posterior = abduct(scm, merge(s.observation, s.extra), prior)
        world = predict(scm, posterior, {m.action: a})
    else:
        raise ValueError(f"unknown route {route!r}")
    reward = Fraction(0)
    groups: dict[Assignment, dict[Assignment, Fraction]] = {}
    latent = [n for n in m.state_vars if n not in set(obs_names)]
    rename = {primed(n): n for n in m.state_vars}
    for w, p in world.items():
        reward += p * magnitude(w[m.reward])
        nxt = w.restrict(rename).rename(rename)
        o2 = nxt.restrict(obs_names)
        z2 = nxt.restrict(latent)
        g = groups.setdefault(o2, {})
        g[z2] = g.get(z2, Fraction(0)) + p
    succ = []
    for o2 in sorted(groups, key=lambda o: _index_key(m, o)):
        total = sum(groups[o2].values(), Fraction(0))
        succ.append((EpistemicState(o2, normalize(groups[o2])), total))
    return reward, succ


def _index_key(m: Ddn, a: Assignment) -> tuple:
    return tuple(m.graph.var(n).index(a[n]) for n in m.state_vars if n in a)


# ---------------------------------------------------------------- closure and solve


def observation_set(m: Ddn, policy: Policy, observed: Iterable[str] | None = None) -> list[str]:
    names = set(m.observed) | set(policy.inputs) if observed is None else set(observed)
    unknown = names - set(m.state_vars)
    if unknown:
        raise ModelError(f"observed set contains non-state variables {sorted(unknown)}")
    return [n for n in m.state_vars if n in names]


def _extra_vars(m: Ddn, mode: Mode) -> list[str]:
    if mode is Mode.WHATIF:
        return [m.action]
    return [m.action, m.reward]


def _check_extra(m: Ddn, mode: Mode, extra: Mapping[str, str]) -> None:
    if not extra:
        return
    allowed = {m.action, m.reward} | set(m.next_state_vars) | set(m.state_vars)
    bad = set(extra) - allowed
    if bad:
        raise UnsupportedQuery(f"evidence on {sorted(bad)} is outside the one-step model")
    if mode is Mode.WHATIF and m.action not in extra:
        raise UnsupportedQuery("what-if evaluation needs the observed act")
    if mode is Mode.HINDSIGHT and not ({m.reward} | set(m.next_state_vars)) & set(extra):
        raise UnsupportedQuery("hindsight evaluation needs a realized outcome")
    if not mode.counterfactual:
        raise UnsupportedQuery(f"{mode.value} evaluation takes no extra evidence")


def _roots(m: Ddn, mode: Mode, obs_names: list[str], initial, extra) -> list[EpistemicState]:
    if isinstance(initial, EpistemicState):
        _check_extra(m, mode, initial.extra)
        return [initial]
    if initial is not None:
        initial = Assignment(initial)
        if set(initial) != set(obs_names):
            raise ModelError(f"initial observation must bind exactly {obs_names}")
        candidates = [initial]
    else:
        candidates = observations(m, obs_names)
    bases = [EpistemicState(o, prior_belief(m, o)) for o in candidates]
    if not mode.counterfactual:
        if extra:
            _check_extra(m, mode, extra)
        return bases
    if extra is None:
        names = _extra_vars(m, mode)
        doms = [m.graph.var(n).domain for n in names]
        options = [Assignment(zip(names, vals)) for vals in product(*doms)]
    else:
        _check_extra(m, mode, extra)
        options = [Assignment(extra)]
    roots = []
    for base in bases:
        for e in options:
            if _factual_worlds(m, base, e):
                roots.append(EpistemicState(base.observation, base.belief, e))
    if not roots:
        raise ZeroEvidence(f"evidence {Assignment(extra or {})!r} has probability zero at every root")
    return roots


def _bottom_components(states: list, succ: Mapping[object, set]) -> list[list]:
    """Strongly connected components with no edge leaving them (iterative Tarjan)."""
    index: dict = {}
    low: dict = {}
    on: set = set()
    stack: list = []
    comps: list[list] = []
    counter = 0
    for root in states:
        if root in index:
            continue
        work = [(root, iter(sorted(succ[root], key=states.index)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on.add(w)
                    work.append((w, iter(sorted(succ[w], key=states.index))))
                    advanced = True
                    break
                if w in on:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    bottom = []
    for comp in comps:
        members = set(comp)
        if all(succ[v] <= members for v in comp):
            bottom.append(comp)
    return bottom


def _solve_linear(states, policy, rewards, transitions, actions, gamma) -> dict:
    r_pi = {}
    p_pi: dict = {}
    for s in states:
        r = Fraction(0)
        row: dict = {}
        for a in actions:
            pa = policy[s].get(a, Fraction(0))
            if not pa:
                continue
            r += pa * rewards[s, a]
            for t, p in transitions[s, a]:
                row[t] = row.get(t, Fraction(0)) + pa * p
        r_pi[s] = r
        p_pi[s] = row
    fixed: dict = {}
    if gamma == 1:
        succ = {s: {t for t, p in p_pi[s].items() if p} for s in states}
        for comp in _bottom_components(states, succ):
            if any(r_pi[s] for s in comp):
                raise Unsolvable("undiscounted evaluation with reward in a recurrent class")
            fixed.update((s, Fraction(0)) for s in comp)
    free = [s for s in states if s not in fixed]
    col = {s: i for i, s in enumerate(free)}
    rows, rhs = [], []
    for s in free:
        row = {col[s]: Fraction(1)}
        b = r_pi[s]
        for t, p in p_pi[s].items():
            if t in col:
                row[col[t]] = row.get(col[t], Fraction(0)) - gamma * p
            else:
                b += gamma * p * fixed[t]
        rows.append(row)
        rhs.append(b)
    try:
        x = linalg.solve(rows, rhs)
    except linalg.SingularSystem as exc:
        raise Unsolvable(str(exc)) from None
    V = dict(fixed)
    V.update(zip(free, x))
    return {s: V[s] for s in states}


def _solve_iteration(states, policy, rewards, transitions, actions, gamma, steps) -> dict:
    V = {s: Fraction(0) for s in states}
    for _ in range(steps):
        V = {
            s: sum(
                (
                    policy[s].get(a, Fraction(0))
                    * (rewards[s, a] + gamma * sum((p * V[t] for t, p in transitions[s, a]), Fraction(0)))
                    for a in actions
                    if policy[s].get(a)
                ),
                Fraction(0),
            )
            for s in states
        }
    return V


def evaluate_epistemic(
    m: Ddn,
    policy: Policy,
    mode: Mode | str = Mode.CONDITIONAL,
    initial: EpistemicState | Mapping[str, str] | None = None,
    observed: Iterable[str] | None = None,
    extra: Mapping[str, str] | None = None,
    gamma: Fraction | None = None,
    guard: int = DEFAULT_GUARD,
    solver: str = "linear",
    steps: int = 100,
    route: str = "twin",
) -> ValueReport:
    """Exact V and Q over the epistemic states reachable from the roots.

    ``route`` selects how counterfactual roots are computed (see
    :func:`_counterfactual_step`).
    """
    mode = Mode(mode)
    obs_names = observation_set(m, policy, observed)
    problems = m.factorization_problems(obs_names)
    if problems:
        raise ModelError("; ".join(problems))
    require_executable(m, policy, obs_names)
    gamma = m.discount if gamma is None else Fraction(gamma)
    if not 0 < gamma <= 1:
        raise ModelError("discount must lie in (0, 1]")

    roots = _roots(m, mode, obs_names, initial, extra)
    states: list[EpistemicState] = []
    seen: set[EpistemicState] = set()
    queue = deque()
    for r in roots:
        if r not in seen:
            seen.add(r)
            states.append(r)
            queue.append(r)
    if len(states) > guard:
        raise ClosureTooLarge(f"more than {guard} epistemic states reachable")
    rewards: dict = {}
    transitions: dict = {}
    pol: dict = {}
    while queue:
        s = queue.popleft()
        pol[s] = dict(policy.dist(s.observation, s.belief))
        for a in m.actions:
            if s.extra:
                r, succ = _counterfactual_step(m, s, a, obs_names, route)
            else:
                step_mode = Mode.INTERVENTIONAL if mode.counterfactual else mode
                r, succ = _step(m, s, a, step_mode, obs_names)
            rewards[s, a] = r
            transitions[s, a] = succ
            for t, _ in succ:
                if t not in seen:
                    seen.add(t)
                    states.append(t)
                    queue.append(t)
                    if len(states) > guard:
                        raise ClosureTooLarge(f"more than {guard} epistemic states reachable")

    if solver == "linear":
        V = _solve_linear(states, pol, rewards, transitions, m.actions, gamma)
    elif solver == "iteration":
        V = _solve_iteration(states, pol, rewards, transitions, m.actions, gamma, steps)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    Q = {
        (s, a): rewards[s, a] + gamma * sum((p * V[t] for t, p in transitions[s, a]), Fraction(0))
        for s in states
        for a in m.actions
    }
    report = ValueReport(
        mode=mode,
        solver=solver,
        action=m.action,
        actions=m.actions,
        order=m.state_vars,
        states=states,
        roots=roots,
        policy=pol,
        rewards=rewards,
        transitions=transitions,
        V=V,
        Q=Q,
        gamma=gamma,
    )
    report.residual = report.bellman_residual()
    return report


def evaluate_mdp(m: Ddn, policy: Policy, gamma: Fraction | None = None, initial: Mapping[str, str] | None = None, **kw) -> ValueReport:
    """Fully observed evaluation: every state variable is treated as observed."""
    return evaluate_epistemic(m, policy, Mode.CONDITIONAL, initial=initial, observed=m.state_vars, gamma=gamma, **kw)


@dataclass(frozen=True)
class Comparison:
    state: str
    action: str
    left: Fraction
    right: Fraction

    @property
    def equal(self) -> bool:
        return self.left == self.right


@dataclass(frozen=True)
class EquivalenceReport:
    modes: tuple[Mode, Mode]
    entries: tuple[Comparison, ...]

    @property
    def equal(self) -> bool:
        return all(c.equal for c in self.entries)

    def mismatches(self) -> list[Comparison]:
        return [c for c in self.entries if not c.equal]

    def lines(self) -> list[str]:
        a, b = (x.value for x in self.modes)
        return [
            f"{c.state}\t{c.action}\t{a}={fraction_text(c.left)}\t{b}={fraction_text(c.right)}\t{'equal' if c.equal else 'DIFFERENT'}"
            for c in self.entries
        ]


def check_equivalence(
    m: Ddn,
    policy: Policy,
    modes: tuple[Mode | str, Mode | str] = (Mode.CONDITIONAL, Mode.INTERVENTIONAL),
    **kw,
) -> EquivalenceReport:
    """Compare Q of two modes on every epistemic state both closures share.

    Counterfactual root states are matched with their observation and belief,
    ignoring the extra evidence they carry.
    """
    left_mode, right_mode = Mode(modes[0]), Mode(modes[1])
    reports = [evaluate_epistemic(m, policy, md, **kw) for md in (left_mode, right_mode)]
    right_index: dict[EpistemicState, list[EpistemicState]] = {}
    for s in reports[1].states:
        right_index.setdefault(s.stripped(), []).append(s)
    entries = []
    for s in reports[0].states:
        for t in right_index.get(s.stripped(), []):
            key = s.key(m.state_vars) if not t.extra else t.key(m.state_vars)
            for a in m.actions:
                entries.append(Comparison(key, f"{m.action}={a}", reports[0].Q[s, a], reports[1].Q[t, a]))
    return EquivalenceReport((left_mode, right_mode), tuple(entries))
