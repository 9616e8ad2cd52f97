"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Prints one row per kernel and problem size with the best wall time of each
backend, the speedup and the largest difference between them, relative to
``max(1, |value|)``.
"""

import argparse
import json
import timeit

import numpy as np

from declab import _fallback

try:
    from declab import _kernels
except ImportError:  # extension not built
    _kernels = None


def coherence_case(n_spins: int, n_times: int, rng):
    p = rng.uniform(0, 1, n_spins)
    args = (p, 1.0 - p, rng.uniform(0, 1, n_spins), np.linspace(0, 5, n_times))
    return args, 1e-12


def propagate_case(n_steps: int, rng):
    theta = rng.uniform(-0.1, 0.1, n_steps)
    steps = np.empty((n_steps, 2, 2))
    steps[:, 0, 0] = steps[:, 1, 1] = np.cos(theta)
    steps[:, 0, 1] = np.sin(theta)
    steps[:, 1, 0] = -np.sin(theta)
    return (steps, np.array([1.0 + 0.5j, -0.25j])), 1e-12


def cases(rng):
    for n, m in ((100, 2000), (10_000, 200), (1_000_000, 4)):
        args, tol = coherence_case(n, m, rng)
        yield "coherence_product", f"N={n} T={m}", args, tol
        yield "log_coherence_abs", f"N={n} T={m}", args, tol
    for n in (10_000, 100_000):
        args, tol = propagate_case(n, rng)
        yield "propagate_linear2", f"steps={n}", args, tol


def best_time(fn, args, repeat: int) -> float:
    number = 1
    while True:
        t = timeit.timeit(lambda: fn(*args), number=number)
        if t > 0.05 or number >= 1000:
            break
        number *= 4
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also write the rows to this file")
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not available; build it with `pip install -e . --no-build-isolation`")
        return 1
    rng = np.random.default_rng(args.seed)
    rows = []
    print(f"{'kernel':<20} {'case':<20} {'python [s]':>12} {'compiled [s]':>13} {'speedup':>8} {'max diff':>11}")
    for name, label, fargs, tol in cases(rng):
        py, cy = getattr(_fallback, name), getattr(_kernels, name)
        ref, got = np.asarray(py(*fargs)), np.asarray(cy(*fargs))
        diff = float(np.max(np.abs(ref - got) / np.maximum(1.0, np.abs(ref))))
        t_py = best_time(py, fargs, args.repeat)
        t_cy = best_time(cy, fargs, args.repeat)
        rows.append({"kernel": name, "case": label, "python": t_py, "compiled": t_cy, "max_rel_diff": diff})
        flag = "" if diff <= tol else "  MISMATCH"
        print(f"{name:<20} {label:<20} {t_py:12.3e} {t_cy:13.3e} {t_py / t_cy:8.1f} {diff:11.1e}{flag}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
