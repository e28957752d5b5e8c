import json

import pytest

from crl.cli import main
from crl.model import fixture_text

LOOP = """model ddn "loop"
var S {0,1} role=state
var A {0,1} role=action
var R {0,1} role=reward
var S' {0,1} role=state slice=next
edge S -> R
edge S -> S'
prior S : 1/2 1/2
prior A : 1/2 1/2
eqn R = S
eqn S' = S
policy p :
  * : 1/2 1/2
discount 1
"""


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_check_reports_latent_parent(capsys):
    code, out, _ = run(capsys, "check", "offline-cbn")
    assert code == 0
    assert "latent parent PH of SH" in out
    assert run(capsys, "check", "offline-cbn", "--require-sufficient")[0] == 1
    assert run(capsys, "check", "online-cbn", "--require-sufficient")[0] == 0


def test_check_ddn_policies(capsys):
    code, out, _ = run(capsys, "check", "sports-ddn", "--require-executable")
    assert code == 1
    assert "policy behavioral executable: false" in out
    assert run(capsys, "check", "sports-ddn", "--require-executable", "--observed", "CG,PH")[0] == 0
    code, out, _ = run(capsys, "--json", "check", "sports-ddn")
    data = json.loads(out)
    assert data["exit"] == code == 0
    assert any(c["check"] == "policy marginal executable" and c["pass"] for c in data["checks"])


def test_queries(capsys):
    assert run(capsys, "query", "offline-cbn", "P(SC=1 | CG=1, do(SH=1))")[1].strip() == "1/4"
    assert run(capsys, "query", "offline-cbn", "P(SC=1 | CG=1, SH=1)")[1].strip() == "1/2"
    assert run(capsys, "query", "offline-confounded-scm", "P(SC[SH=1]=1 | CG=1, SH=0)")[1].strip() == "0"
    code, out, _ = run(capsys, "query", "offline-cbn", "P(SC=1 | CG=1, do(SH=1))", "--decimal", "3")
    assert out.strip() == "1/4\t0.250"
    data = json.loads(run(capsys, "query", "offline-cbn", "P(SC=1 | CG=1, do(SH=1))", "--json")[1])
    assert data["value"] == "1/4" and data["level"] == "interventional"


def test_counterfactual_on_network_needs_flag(capsys):
    q = "P(SC[SH=1]=1 | CG=1, SH=0)"
    code, _, err = run(capsys, "query", "offline-cbn", q)
    assert code == 4 and "--canonical-scm" in err
    code, out, _ = run(capsys, "query", "offline-cbn", q, "--canonical-scm")
    assert code == 0 and out.strip()


def test_unrolled_query(capsys):
    code, out, _ = run(capsys, "query", "sports-ddn", "P(SC@0=1 | CG@0=1, do(SH@0=1))", "--unroll", "1", "--policy", "marginal")
    assert code == 0 and out.strip() == "1/4"


def test_eval_modes(capsys):
    code, out, _ = run(capsys, "eval", "sports-ddn", "--policy", "marginal", "--initial", "CG=1")
    assert code == 0
    first = out.splitlines()[0].split("\t")
    assert first[0] == "conditional" and first[2:] == ["V", "1/3"]
    out = run(capsys, "eval", "sports-ddn", "--policy", "marginal", "--initial", "CG=1", "--mode", "interventional")[1]
    assert out.splitlines()[0].endswith("\tV\t1/6")
    code, out, _ = run(capsys, "eval", "sports-ddn", "--policy", "behavioral", "--mode", "hindsight", "--observe", "SC=1")
    assert code == 0
    assert "hindsight\t<PH=1,CG=1; SC=1 | b{GH=0:1/2; GH=1:1/2}>\tSH=0\t1/2" in out.splitlines()
    data = json.loads(run(capsys, "eval", "sports-ddn", "--policy", "marginal", "--initial", "CG=1", "--json")[1])
    assert data["rows"][0]["value"] == "1/3"


def test_eval_errors(capsys, tmp_path):
    assert run(capsys, "eval", "sports-ddn", "--policy", "marginal", "--gamma", "x")[0] == 2
    # eval adds the policy inputs to the observation set unless told otherwise
    assert run(capsys, "eval", "sports-ddn", "--policy", "behavioral", "--observed", "CG")[0] == 6
    assert run(capsys, "eval", "sports-ddn", "--policy", "nope")[0] == 4
    assert run(capsys, "eval", "offline-cbn")[0] == 4
    assert run(capsys, "eval", "sports-ddn", "--policy", "marginal", "--mode", "whatif", "--initial", "CG=0", "--observe", "SH=1")[0] == 3
    loop = tmp_path / "loop.crl"
    loop.write_text(LOOP)
    code, _, err = run(capsys, "eval", str(loop))
    assert code == 5 and "unsolvable" in err
    assert run(capsys, "eval", str(loop), "--gamma", "1/2")[0] == 0


def test_zero_evidence_query(capsys):
    assert run(capsys, "query", "offline-cbn", "P(SC=1 | CG=0, SH=1)")[0] == 3


def test_parse_errors(capsys, tmp_path):
    bad = tmp_path / "bad.crl"
    bad.write_text(fixture_text("offline-cbn").replace("edge", "edgy", 1))
    code, _, err = run(capsys, "check", str(bad))
    assert code == 2 and "error:" in err
    assert run(capsys, "check", str(tmp_path / "missing.crl"))[0] == 2
    assert run(capsys, "query", "offline-cbn", "P(SC=1")[0] == 2


def test_simulate(capsys):
    args = ("simulate", "sports-ddn", "--policy", "behavioral", "--observed", "CG,PH", "--steps", "5", "--seed", "3")
    code, out, _ = run(capsys, *args)
    assert code == 0 and len(out.splitlines()) == 5
    assert run(capsys, *args)[1] == out
    assert run(capsys, "simulate", "sports-ddn", "--policy", "marginal", "--steps", "0")[1] == ""
    assert run(capsys, "simulate", "sports-ddn", "--policy", "behavioral")[0] == 6


def test_reproduce(capsys):
    code, out, _ = run(capsys, "reproduce")
    assert code == 0
    assert out.splitlines()[-1] == "26/26 values reproduced"
    data = json.loads(run(capsys, "reproduce", "--json")[1])
    assert data["passed"] == data["checked"] == 26


def test_help_lists_commands(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for cmd in ("check", "query", "eval", "simulate", "reproduce"):
        assert cmd in out
