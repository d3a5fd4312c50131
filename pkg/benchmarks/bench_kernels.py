"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Problem sizes mirror the Monte Carlo design (n=500 training rows per
fold, p=10) and a wider case. Each row reports the best-of-``repeat``
wall time per solve and the speedup of the compiled build.
"""
import argparse
import sys
import time

import numpy as np

from hetdecomp._kernels import _cd_py, _logit_py

try:
    from hetdecomp._kernels import _cd, _logit
except ImportError:
    sys.exit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")


def lasso_problem(rng, n, p):
    x = np.asfortranarray(rng.standard_normal((n, p)))
    beta = np.zeros(p)
    beta[: min(5, p)] = 1.0
    y = x @ beta + rng.standard_normal(n)
    return x, y - y.mean()


def logit_problem(rng, n, p, k=3):
    x = rng.uniform(-1, 1, (n, p))
    xa = np.ascontiguousarray(np.hstack([np.ones((n, 1)), x]))
    eta = np.column_stack([np.zeros(n), x[:, 0], np.zeros(n)])
    prob = np.exp(eta) / np.exp(eta).sum(axis=1, keepdims=True)
    t = (rng.uniform(size=n)[:, None] > prob.cumsum(axis=1)).sum(axis=1).astype(np.int64)
    step = 1.0 / (0.5 * np.linalg.norm(xa, 2) ** 2 / n)
    return xa, t, step, k


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench_lasso(rng, n, p, repeat):
    x, y = lasso_problem(rng, n, p)
    lam = 0.05

    def run(kernel):
        return lambda: kernel(x, y, np.zeros(p), lam, 1e-7, 10_000)

    return best_time(run(_cd_py.lasso_cd), repeat), best_time(run(_cd.lasso_cd), repeat)


def bench_fista(rng, n, p, repeat):
    xa, t, step, k = logit_problem(rng, n, p)
    lam = 0.01

    def run(kernel):
        return lambda: kernel(xa, t, np.zeros((p + 1, k - 1)), lam, step, 1e-8, 20_000, np.empty(0))

    return best_time(run(_logit_py.logit_fista), repeat), best_time(run(_logit.logit_fista), repeat)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<8s}{'n':>7s}{'p':>5s}{'python [ms]':>14s}{'cython [ms]':>14s}{'speedup':>9s}")
    for name, bench in (("lasso", bench_lasso), ("fista", bench_fista)):
        for n, p in ((500, 10), (2000, 50)):
            py, cy = bench(rng, n, p, args.repeat)
            print(f"{name:<8s}{n:>7d}{p:>5d}{py * 1e3:>14.2f}{cy * 1e3:>14.2f}{py / cy:>8.1f}x")


if __name__ == "__main__":
    main()
