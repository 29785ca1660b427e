"""Throughput comparison of the compiled and pure-numpy kernel backends.

Run: python3 benchmarks/kernel_bench.py [--points 1000000]
"""

import argparse
import time

import numpy as np

from paisc import _kernels_py
from paisc.bench import gen_relu_patterns, DEFAULT_NET_SEED
from paisc.constraints import parse_constraint
from paisc.pimais import MixtureProposal

try:
    from paisc import _native
except ImportError:
    _native = None

CONSTRAINTS = {
    "circle": parse_constraint("x^2 + y^2 <= 1", "x -2 2\ny -2 2"),
    "torus": parse_constraint(
        "(sqrt(x^2+y^2)-3)^2 + z^2 <= 1", "x -5 5\ny -5 5\nz -5 5"
    ),
    "relu-p7": gen_relu_patterns(5, 5, DEFAULT_NET_SEED, require_truth=False)[7].constraint,
}


def _time(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--points", type=int, default=1_000_000)
    args = parser.parse_args()

    if _native is None:
        print("compiled backend not built; showing pure-python timings only")

    gen = np.random.default_rng(0)
    print(f"{'kernel':<24} {'pure ms':>10} {'cython ms':>10} {'speedup':>8}")

    for name, c in CONSTRAINTS.items():
        lo = np.array([iv.lo for iv in c.domain.intervals])
        hi = np.array([iv.hi for iv in c.domain.intervals])
        pts = np.ascontiguousarray(lo + gen.random((args.points, c.dim)) * (hi - lo))
        cc = c.compiled()
        t_pure = _time(lambda: _kernels_py.indicator_batch(cc, pts))
        if _native is not None:
            t_nat = _time(lambda: _native.indicator_batch(cc, pts))
            print(f"indicator {name:<14} {1e3 * t_pure:>10.1f} {1e3 * t_nat:>10.1f}"
                  f" {t_pure / t_nat:>7.1f}x")
        else:
            print(f"indicator {name:<14} {1e3 * t_pure:>10.1f} {'-':>10} {'-':>8}")

    for d in (2, 8):
        means = gen.normal(size=(100, d))
        q = MixtureProposal(means, 0.5 * np.eye(d))
        pts = np.ascontiguousarray(gen.normal(size=(50_000, d)))
        t_pure = _time(lambda: _kernels_py.mixture_logpdf(pts, q.means, q.chol_inv, q.log_norm))
        if _native is not None:
            t_nat = _time(lambda: _native.mixture_logpdf(pts, q.means, q.chol_inv, q.log_norm))
            print(f"mixture logpdf d={d:<7} {1e3 * t_pure:>10.1f} {1e3 * t_nat:>10.1f}"
                  f" {t_pure / t_nat:>7.1f}x")
        else:
            print(f"mixture logpdf d={d:<7} {1e3 * t_pure:>10.1f} {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
