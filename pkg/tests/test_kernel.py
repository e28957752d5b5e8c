import random
from fractions import Fraction

import pytest

from crl import cbn, kernel
from crl.errors import TooLarge
from crl.model import load

from generators import random_cbn

compiled = pytest.mark.skipif("compiled" not in kernel.available(), reason="compiled kernel not built")


def _fresh(m):
    return cbn.Cbn(m.graph, m.cpts)


@compiled
def test_backends_agree_on_weights_and_projections():
    for seed in range(60):
        rng = random.Random(seed)
        m = random_cbn(rng, n=rng.randint(2, 6), max_card=3)
        names = list(m.graph.names)
        keep = rng.sample(names, rng.randint(0, len(names)))
        ev = {n: rng.choice(m.graph.var(n).domain) for n in names if n not in keep and rng.random() < 0.4}
        out = {}
        for b in ("python", "compiled"):
            with kernel.using(b):
                fresh = _fresh(m)
                out[b] = (list(fresh.weights), fresh.table(keep, ev))
        assert out["python"] == out["compiled"]


@compiled
def test_fixture_queries_agree_across_backends():
    q = cbn.Query({"SC": "1"}, {"CG": "1"}, {"SH": "1"})
    with kernel.using("python"):
        a = cbn.interventional(load("offline-cbn"), q)
    with kernel.using("compiled"):
        b = cbn.interventional(load("offline-cbn"), q)
    assert a == b == Fraction(1, 4)


def test_python_backend_always_available():
    assert "python" in kernel.available()
    with kernel.using("python"):
        assert kernel.backend() == "python"
    with pytest.raises(ValueError):
        kernel.set_backend("fortran")


def test_guard_refuses_large_enumeration(monkeypatch):
    monkeypatch.setenv("CRL_ENUM_GUARD", "16")
    m = load("online-cbn")
    with pytest.raises(TooLarge):
        m.mass({})


def test_benchmark_runs_and_backends_agree(capsys):
    import importlib.util
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_enum.py"
    spec = importlib.util.spec_from_file_location("bench_enum", path)
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    assert bench.main(["--sizes", "5", "--repeat", "1"]) == 0
    assert "backends:" in capsys.readouterr().out
