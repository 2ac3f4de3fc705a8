"""Compare the compiled simplex core with the pure-Python fallback.

    python3 benchmarks/bench_simplex.py [--repeat N]

Both cores run on the same inputs: random dense LPs of a few sizes and one
separation MILP from a random 6-bus system. Objective values are checked to
agree before timings are reported.
"""
import argparse
import os
import statistics
import sys
import time

import numpy as np

from flexdro.dispatch import build_matrices, startup_state
from flexdro.lp import LinearProgram, simplex, solve_lp
from flexdro.lp import _simplex_py
from flexdro.network import Hyperbox, build_network
from flexdro.separation import SeparationModel
from flexdro.synthetic import random_case

CORES = {"python": _simplex_py.simplex_core}
if simplex.CORE_NAME == "cython":
    CORES = {"cython": simplex._core, **CORES}


def dense_lp(rng, m, n):
    A = rng.uniform(0.0, 1.0, (m, n))
    return LinearProgram(-rng.uniform(0.5, 1.5, n), A, A.sum(axis=1) * rng.uniform(0.2, 0.6, m),
                         upper=np.full(n, 10.0))


def separation_case(seed=4):
    rng = np.random.default_rng(seed)
    net = build_network(random_case(rng, 6))
    m = build_matrices(net, startup_state(net))
    box = Hyperbox(net.load, 0.5 * net.load + 2.0)
    return SeparationModel(m, box)


def timed(fn, repeat):
    samples = []
    value = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        value = fn()
        samples.append(time.perf_counter() - t0)
    return value, statistics.median(samples)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timed repetitions per workload (median reported)")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    workloads = [(f"lp {m}x{n}", (lambda lp=dense_lp(rng, m, n): solve_lp(lp).objective))
                 for m, n in ((20, 40), (60, 120), (150, 300))]
    model = separation_case()
    workloads.append(("separation milp", lambda: model.solve(0.6).psi))

    if "cython" not in CORES:
        print("compiled core not available; timing the Python core only", file=sys.stderr)
    header = f"{'workload':<18}" + "".join(f"{name:>12}" for name in CORES) + ("   speedup" if len(CORES) > 1 else "")
    print(header)
    saved = simplex._core
    try:
        for label, fn in workloads:
            times, values = [], []
            for core in CORES.values():
                simplex._core = core
                value, t = timed(fn, args.repeat)
                times.append(t)
                values.append(value)
            if not np.allclose(values, values[0], atol=1e-6, rtol=1e-9):
                raise SystemExit(f"{label}: cores disagree {values}")
            row = f"{label:<18}" + "".join(f"{1000 * t:>10.2f}ms" for t in times)
            if len(times) > 1:
                row += f"{times[1] / times[0]:>9.1f}x"
            print(row)
    finally:
        simplex._core = saved
    print(f"(median of {args.repeat}; FLEXDRO_PURE_PYTHON={os.environ.get('FLEXDRO_PURE_PYTHON', '')!r})")


if __name__ == "__main__":
    main()
