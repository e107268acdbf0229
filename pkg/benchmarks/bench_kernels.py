"""Time the numba kernels against the numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 20]

Prints one line per kernel and size with the best time of each backend and
the speedup.  The first numba call (compilation) is excluded.
"""
import argparse
import time

import numpy as np

from monoperiodic import _kernels

SIZES = [(256, 1), (1024, 1), (64, 50), (256, 50), (64, 200)]


def best_of(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    inc_nb, sweep_nb, _, resid_nb = _kernels._build_numba()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'m':>6}{'n':>5}{'numpy [s]':>13}{'numba [s]':>13}{'speedup':>9}")
    for m, n in SIZES:
        S = np.ascontiguousarray(rng.random((n, n)) / n * 0.9)
        R = np.linalg.inv(np.eye(n) - np.linalg.matrix_power(S, m))
        W0, W1 = 0.5 * S, 0.5 * np.eye(n)
        H = rng.random((m, n))
        Q = inc_nb(W0, W1, H)
        U = sweep_nb(S, R, Q)
        cases = [
            ("increments", _kernels.increments_np, inc_nb, (W0, W1, H)),
            ("periodic_sweep", _kernels.periodic_sweep_np, sweep_nb, (S, R, Q)),
            ("step_residual", _kernels.step_residual_np, resid_nb, (S, U, Q)),
        ]
        for name, f_np, f_nb, a in cases:
            if not np.allclose(f_np(*a), f_nb(*a), rtol=1e-12, atol=1e-12):
                raise SystemExit(f"{name}: backends disagree at m={m}, n={n}")
            t_np = best_of(f_np, a, args.repeat)
            t_nb = best_of(f_nb, a, args.repeat)
            print(f"{name:<16}{m:>6}{n:>5}{t_np:>13.3e}{t_nb:>13.3e}{t_np / t_nb:>9.1f}")


if __name__ == "__main__":
    main()
