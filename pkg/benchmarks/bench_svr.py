"""Time the compiled and pure-Python SVR kernels on the same random problems.

    python benchmarks/bench_svr.py --sizes 10 40 200 --repeats 5
"""

import argparse
import time

import numpy as np

from energynorm import kernels


def problem(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = X @ rng.normal(size=d) + rng.normal(0, 0.3, n)
    return X, y


def time_solve(impl, X, y, C, eps, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = impl.svr_solve(X, y, C, eps, 1e-10, 100000)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 40, 200])
    ap.add_argument("--dims", type=int, default=3)
    ap.add_argument("--C", type=float, default=1.0)
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)

    impls = kernels.implementations()
    if "cython" not in impls:
        print("compiled extension not built; run `python setup.py build_ext --inplace` first")
    names = sorted(impls)
    print(f"{'n':>6} " + " ".join(f"{name + ' [ms]':>14}" for name in names) + f" {'speedup':>8} {'|dJ|':>10}")
    for n in args.sizes:
        X, y = problem(n, args.dims, n)
        timings, objectives = {}, {}
        for name in names:
            timings[name], res = time_solve(impls[name], X, y, args.C, args.eps, args.repeats)
            objectives[name] = res[2]
        speed = timings["python"] / timings["cython"] if "cython" in timings else float("nan")
        gap = max(objectives.values()) - min(objectives.values())
        print(f"{n:>6} " + " ".join(f"{timings[k] * 1e3:>14.3f}" for k in names) + f" {speed:>8.2f} {gap:>10.2e}")


if __name__ == "__main__":
    main()
