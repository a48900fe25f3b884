"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--placements 20000] [--nodes 200000]

Times placement evaluation (the brute-force oracle's inner loop) and the
longest-path sweep used by lifecycle severity, then checks that both
backends return identical numbers.
"""

import argparse
import random
import time

import numpy as np

from contflow import kernels
from contflow.catalog import Catalog, Link, Offer, Site, SiteClass
from contflow.objective import Objective
from contflow.oracle import build_problem
from contflow.sim import SimConfig
from contflow.workflow import FlowEdge, InstanceGraph, Task


def bench_catalog():
    sites = [Site("fac", SiteClass.FACILITY_HPC), Site("c1", SiteClass.CLOUD_REGION, "p"),
             Site("c2", SiteClass.CLOUD_REGION, "p")]
    offers = [Offer(f"{s.id}-{j}", s.id, 10.0 * (j + 1), memory=256e9,
                    price_on_demand=0.0 if s.id == "fac" else 1.0 + j, power=300.0 + 100 * j,
                    idle_power=40.0)
              for s in sites for j in range(2)]
    links = [Link(a.id, b.id, 5e8, 0.01, 9e-11 if a.is_cloud else 0.0)
             for a in sites for b in sites if a != b]
    return Catalog(tuple(sites), tuple(offers), tuple(links))


def bench_graph(rng, n):
    tasks = [Task(f"t{k}", work=rng.uniform(100, 5000), memory=8e9) for k in range(n)]
    edges = [FlowEdge(f"t{a}", f"t{b}", rng.uniform(1e8, 1e10), rng.random() < 0.3)
             for a in range(n) for b in range(a + 1, n) if rng.random() < 0.4]
    return InstanceGraph.from_tasks(tasks, edges)


def timed(fn, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--placements", type=int, default=20000)
    ap.add_argument("--nodes", type=int, default=200000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    try:
        kernels.backend_module("cython")
        backends = ["cython", "python"]
    except ImportError:
        print("compiled extension not built; timing the fallback only")
        backends = ["python"]

    rng = random.Random(args.seed)
    problem = build_problem(bench_graph(rng, 8), bench_catalog(), Objective(1, 1, 1), SimConfig())
    rows = np.array([[rng.choice(c) for c in problem.choices] for _ in range(args.placements)],
                    dtype=np.int32)

    n = args.nodes
    order = list(range(n))
    succ, weight, ptr = [], [], [0]
    for v in range(n):
        for w in sorted({rng.randrange(v + 1, n) for _ in range(2)} if v < n - 1 else ()):
            succ.append(w)
            weight.append(rng.uniform(0, 10))
        ptr.append(len(succ))

    results = {}
    print(f"{'kernel':<22}{'backend':<10}{'seconds':>10}{'speedup':>10}")
    for name, fn in (
        (f"evaluate x{args.placements}",
         lambda b: kernels.evaluate_placements(problem.arrays, rows, b)),
        (f"longest_path n={n}",
         lambda b: kernels.longest_path(order, ptr, succ, weight, backend=b)),
    ):
        times = {}
        for b in backends:
            times[b], results[(name, b)] = timed(lambda: fn(b), args.repeats)
        for b in backends:
            print(f"{name:<22}{b:<10}{times[b]:>10.4f}{times['python'] / times[b]:>9.1f}x")

    if len(backends) == 2:
        for name in sorted({k[0] for k in results}):
            a, b = results[(name, "cython")], results[(name, "python")]
            same = all(np.array_equal(x, y) for x, y in zip(a, b)) if isinstance(a, (list, tuple)) else a == b
            print(f"{name}: backends agree = {same}")


if __name__ == "__main__":
    main()
