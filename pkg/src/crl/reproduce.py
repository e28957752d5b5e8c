"""Reference values of the sports example checked against the bundled models."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping

from . import cbn, scm
from .cbn import Query
from .dsl import parse_model
from .dynamic import marginal_policy, unroll
from .evaluate import Mode, evaluate_epistemic
from .model import build, fixture_text


@dataclass(frozen=True)
class Check:
    label: str
    expected: Fraction
    computed: Fraction | None
    error: str = ""

    @property
    def passed(self) -> bool:
        return not self.error and self.computed == self.expected

    def line(self) -> str:
        got = self.error or _text(self.computed)
        return f"{'PASS' if self.passed else 'FAIL'}  {self.label}  expected={_text(self.expected)}  computed={got}"

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "expected": _text(self.expected),
            "computed": None if self.computed is None else _text(self.computed),
            "error": self.error or None,
            "passed": self.passed,
        }


def _text(p: Fraction | None) -> str:
    if p is None:
        return "-"
    return str(p.numerator) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"


def _cases(load: Callable[[str], object]) -> list[tuple[str, Fraction, Callable[[], Fraction]]]:
    F = Fraction
    sports = {"PH": "1", "CG": "1", "SH": "1", "SC": "1", "GH": "0"}
    shoot = Query({"SC": "1"}, {"CG": "1", "SH": "1"})
    do_shoot = Query({"SC": "1"}, {"CG": "1"}, {"SH": "1"})
    whatif = Query({"SC": "1"}, {"CG": "1", "SH": "0"}, {"SH": "1"}, counterfactual=True)
    hindsight = Query({"SC": "1"}, {"CG": "1", "PH": "1", "SC": "1"}, {"SH": "1"}, counterfactual=True)
    online_shoot = Query({"SC": "1"}, {"CG": "1", "PH": "1", "SH": "1"})
    online_do = Query({"SC": "1"}, {"CG": "1", "PH": "1"}, {"SH": "1"})
    cg1 = {"CG": "1"}

    def ddn():
        return load("sports-ddn")

    def offline_eval(mode):
        m = ddn()
        return evaluate_epistemic(m, m.policies["marginal"], mode, initial=cg1)

    def online_eval(mode):
        m = ddn()
        return evaluate_epistemic(m, m.policies["behavioral"], mode, initial={"CG": "1", "PH": "1"}, observed=["CG", "PH"])

    def two_slice():
        m = ddn()
        flat = scm.from_cbn(unroll(m, 2, m.policies["marginal"]))
        q = Query(
            {"SC@0": "1"},
            {"CG@0": "1", "PH@0": "1", "SH@0": "0", "SC@1": "1"},
            {"SH@0": "1"},
            counterfactual=True,
        )
        return scm.counterfactual(flat, q)

    def hindsight_q():
        m = ddn()
        r = evaluate_epistemic(m, m.policies["behavioral"], Mode.HINDSIGHT, extra={"SC": "1"})
        return r.q({"CG": "1", "PH": "1"}, "0", extra={"SC": "1"})

    def whatif_q():
        m = ddn()
        r = evaluate_epistemic(m, m.policies["marginal"], Mode.WHATIF, initial=cg1, extra={"SH": "0"})
        return r.q(cg1, "1", extra={"SH": "0"})

    def mu(cg):
        m = ddn()
        return marginal_policy(m, m.policies["behavioral"], ["CG"]).rows[(cg,)]["1"]

    return [
        ("joint P(PH=1,CG=1,SH=1,SC=1,GH=0) online-cbn", F(1, 8), lambda: cbn.joint(load("online-cbn"), sports)),
        ("joint P(PH=1,CG=1,SH=1,SC=1,GH=0) online-scm", F(1, 8), lambda: scm.scm_joint(load("online-scm"), sports)),
        ("joint P(PH=1,CG=1,SH=1,SC=1,GH=0) converted online-cbn", F(1, 8), lambda: scm.scm_joint(scm.from_cbn(load("online-cbn")), sports)),
        ("online-cbn P(SC=1|CG=1,PH=1,SH=1)", F(1, 2), lambda: cbn.conditional(load("online-cbn"), online_shoot)),
        ("online-cbn P(SC=1|CG=1,PH=1,do(SH=1))", F(1, 2), lambda: cbn.interventional(load("online-cbn"), online_do)),
        ("offline-cbn P(SC=1|CG=1,SH=1)", F(1, 2), lambda: cbn.conditional(load("offline-cbn"), shoot)),
        ("offline-cbn P(SC=1|CG=1,do(SH=1))", F(1, 4), lambda: cbn.interventional(load("offline-cbn"), do_shoot)),
        ("offline-confounded-scm P(SC=1|CG=1,SH=1)", F(1, 2), lambda: scm.conditional(load("offline-confounded-scm"), shoot)),
        ("offline-confounded-scm P(SC=1|CG=1,do(SH=1))", F(1, 4), lambda: scm.interventional(load("offline-confounded-scm"), do_shoot)),
        ("offline-confounded-scm P(SC[SH=1]=1|CG=1,SH=0)", F(0), lambda: scm.counterfactual(load("offline-confounded-scm"), whatif)),
        ("offline-unconfounded-scm P(SC=1|CG=1,SH=1)", F(1, 2), lambda: scm.conditional(load("offline-unconfounded-scm"), shoot)),
        ("offline-unconfounded-scm P(SC=1|CG=1,do(SH=1))", F(1, 2), lambda: scm.interventional(load("offline-unconfounded-scm"), do_shoot)),
        ("offline-unconfounded-scm P(SC[SH=1]=1|CG=1,SH=0)", F(1, 2), lambda: scm.counterfactual(load("offline-unconfounded-scm"), whatif)),
        ("offline-cbn backdoor adjustment over {PH}", F(1, 4), lambda: cbn.backdoor_adjust(load("offline-cbn"), {"SH": "1"}, {"SC": "1"}, cg1, ["PH"])),
        ("sports-ddn marginal policy mu(SH=1|CG=1)", F(1, 2), lambda: mu("1")),
        ("sports-ddn marginal policy mu(SH=1|CG=0)", F(0), lambda: mu("0")),
        ("sports-ddn conditional V(CG=1, uniform b)", F(1, 3), lambda: offline_eval(Mode.CONDITIONAL).value(cg1)),
        ("sports-ddn conditional Q(CG=1, uniform b, SH=1)", F(1, 2), lambda: offline_eval(Mode.CONDITIONAL).q(cg1, "1")),
        ("sports-ddn interventional V(CG=1, uniform b)", F(1, 6), lambda: offline_eval(Mode.INTERVENTIONAL).value(cg1)),
        ("sports-ddn interventional Q(CG=1, uniform b, do(SH=1))", F(1, 4), lambda: offline_eval(Mode.INTERVENTIONAL).q(cg1, "1")),
        ("sports-ddn online conditional Q(CG=1,PH=1,b, SH=1)", F(1, 2), lambda: online_eval(Mode.CONDITIONAL).q({"CG": "1", "PH": "1"}, "1")),
        ("sports-ddn online interventional Q(CG=1,PH=1,b, do(SH=1))", F(1, 2), lambda: online_eval(Mode.INTERVENTIONAL).q({"CG": "1", "PH": "1"}, "1")),
        ("sports-ddn what-if Q(CG=1,SH=0,b, do(SH=1))", F(0), whatif_q),
        ("online-scm P(SC[SH=1]=1|CG=1,PH=1,SC=1)", F(1), lambda: scm.counterfactual(load("online-scm"), hindsight)),
        ("sports-ddn two-slice P(SC@0[SH@0=1]=1|CG@0=1,PH@0=1,SH@0=0,SC@1=1)", F(1), two_slice),
        ("sports-ddn hindsight Q(CG=1,PH=1,SC=1,b, do(SH=0))", F(1, 2), hindsight_q),
    ]


def run_reproduction(fixtures: Mapping[str, str] | None = None) -> list[Check]:
    """Evaluate every reference value; ``fixtures`` overrides model texts by name."""
    fixtures = dict(fixtures or {})
    cache: dict[str, object] = {}

    def load(name: str):
        if name not in cache:
            text = fixtures[name] if name in fixtures else fixture_text(name)
            cache[name] = build(parse_model(text))
        return cache[name]

    out = []
    for label, expected, thunk in _cases(load):
        try:
            out.append(Check(label, expected, Fraction(thunk())))
        except Exception as exc:  # a failing check is reported, not raised
            out.append(Check(label, expected, None, f"{type(exc).__name__}: {exc}"))
    return out


def manifest_json(checks: list[Check]) -> str:
    return json.dumps(
        {"checked": len(checks), "passed": sum(c.passed for c in checks), "checks": [c.as_dict() for c in checks]},
        indent=2,
    )

