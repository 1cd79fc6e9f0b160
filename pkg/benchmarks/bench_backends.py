"""Compare the compiled trial kernel against the numpy fallback.

    python benchmarks/bench_backends.py [--repeats 5] [--sizes 50 100 200]

Times whole UMDA trials (lambda = n, mu = ceil(sqrt(n))) on each built-in
problem. The first numba call is timed separately since it includes
compilation (or loading from the on-disk cache).
"""
import argparse
import math
import statistics
import time

import numpy as np

from umdalab import pbdist
from umdalab.engine import AlgorithmParams, run, trial_seed


def time_trials(problem, n, repeats, backend):
    mu = math.ceil(math.sqrt(n))
    times, evals = [], []
    for i in range(repeats):
        p = AlgorithmParams(n, n, mu, seed=trial_seed(0, n, i))
        t0 = time.perf_counter()
        rec = run(p, problem, backend=backend)
        times.append(time.perf_counter() - t0)
        evals.append(rec.evaluations)
    return statistics.median(times), statistics.fmean(evals)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 200])
    args = ap.parse_args()

    t0 = time.perf_counter()
    run(AlgorithmParams(10, 10, 3), "onemax", backend="numba")
    print(f"numba warm-up (compile or cache load): {time.perf_counter() - t0:.2f}s")

    print(f"{'problem':<12} {'n':>5} {'numba s':>9} {'numpy s':>9} {'speedup':>8} {'evals nb':>10} {'evals np':>10}")
    for problem in ("onemax", "leadingones", "binval"):
        for n in args.sizes:
            tn, en = time_trials(problem, n, args.repeats, "numba")
            tp, ep = time_trials(problem, n, args.repeats, "numpy")
            print(f"{problem:<12} {n:>5} {tn:>9.4f} {tp:>9.4f} {tp / tn:>8.1f} {en:>10.0f} {ep:>10.0f}")

    print()
    print(f"{'pmf k':>6} {'numba s':>9} {'numpy s':>9} {'speedup':>8}")
    pbdist._pmf_numba(np.full(4, 0.5))
    for k in (100, 1000, 5000):
        probs = np.random.default_rng(k).random(k)
        t0 = time.perf_counter()
        pbdist._pmf_numba(probs)
        tn = time.perf_counter() - t0
        t0 = time.perf_counter()
        pbdist._pmf_numpy(probs)
        tp = time.perf_counter() - t0
        print(f"{k:>6} {tn:>9.4f} {tp:>9.4f} {tp / tn:>8.1f}")


if __name__ == "__main__":
    main()
