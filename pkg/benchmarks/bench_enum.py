"""Time the enumeration kernel with each backend on random networks.

    python3 benchmarks/bench_enum.py [--sizes 8 12 16] [--repeat 3]

Each run builds the joint weight table of a fresh network and answers a
handful of marginal queries; both backends must return identical tables.
"""

import argparse
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from crl import kernel  # noqa: E402
from crl.cbn import Cbn  # noqa: E402

from generators import random_cbn  # noqa: E402


def workload(m, rng):
    fresh = Cbn(m.graph, m.cpts)
    names = list(m.graph.names)
    out = []
    for _ in range(5):
        keep = rng.sample(names, 2)
        ev = {n: rng.choice(m.graph.var(n).domain) for n in names if n not in keep and rng.random() < 0.3}
        out.append(fresh.table(keep, ev))
    return out


def time_backend(name, m, seed, repeat):
    best, result = float("inf"), None
    with kernel.using(name):
        for _ in range(repeat):
            start = time.perf_counter()
            result = workload(m, random.Random(seed))
            best = min(best, time.perf_counter() - start)
    return best, result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 12, 16])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = kernel.available()
    print(f"backends: {', '.join(backends)}")
    print(f"{'vars':>5} {'joint':>8} " + " ".join(f"{b + ' s':>12}" for b in backends) + (f" {'speedup':>8}" if len(backends) > 1 else ""))
    for n in args.sizes:
        rng = random.Random(args.seed + n)
        m = random_cbn(rng, n=n, max_card=2, p=0.3)
        times = {}
        results = {}
        for b in backends:
            times[b], results[b] = time_backend(b, m, args.seed, args.repeat)
        if len(set(map(repr, results.values()))) != 1:
            print(f"backends disagree on a {n}-variable network", file=sys.stderr)
            return 1
        row = f"{n:>5} {2 ** n:>8} " + " ".join(f"{times[b]:>12.4f}" for b in backends)
        if len(backends) > 1:
            row += f" {times['python'] / times['compiled']:>7.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    sys.exit(main())
