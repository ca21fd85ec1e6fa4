"""Compare the compiled and pure-Python kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--steps N] [--cells N] [--repeat N]
"""

import argparse
import time

import numpy as np

from epispatial import _kernels_py

try:
    from epispatial import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(steps, cells):
    seir = np.array([0.5, 0.5, 0.25, 0.25, 0.5, 0.5, 1.0, 0.0])
    y_seir = np.array([1.0, 0.1, 0.01, 0.0, 0.0])
    coupled = np.concatenate([seir[:7], [1.0], [2.0, 1.0, 2.0]])
    y_coupled = np.array([1.0, 0.1, 0.01, 0.0, 0.0, 2.0, 1.5, 0.5])
    rng = np.random.default_rng(0)
    f = [rng.uniform(0.1, 1.0, cells) for _ in range(7)]

    def rk4(mod, model, p, y):
        return lambda: mod.rk4_integrate(model, p, y, 1e-3, steps, 1000, 1e-12)

    return {
        "rk4 seir": lambda mod: rk4(mod, _kernels_py.SEIR, seir, y_seir),
        "rk4 coupled": lambda mod: rk4(mod, _kernels_py.COUPLED, coupled, y_coupled),
        "host reaction": lambda mod: lambda: mod.host_reaction(f[0], f[1], f[2], f[3], f[4], f[5], f[6],
                                                                0.25, 0.5, 0.5, 1.0, 1.0, 1e-3),
        "reservoir reaction": lambda mod: lambda: mod.reservoir_reaction(f[0] + f[1], f[0], f[1], f[2], f[3],
                                                                          f[4], 1e-3),
        "logistic reaction": lambda mod: lambda: mod.logistic_reaction(f[0], f[1], f[2], 1e-3),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--cells", type=int, default=128 * 128)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; only the Python backend is available")
    print(f"{'kernel':<20}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}{'max diff':>12}")
    for name, make in cases(args.steps, args.cells).items():
        tp, op = best_of(make(_kernels_py), args.repeat)
        if _ckernels is None:
            print(f"{name:<20}{tp:>12.4f}")
            continue
        tc, oc = best_of(make(_ckernels), args.repeat)
        a = op[0] if name.startswith("rk4") else op
        b = oc[0] if name.startswith("rk4") else oc
        diff = max(float(np.max(np.abs(np.asarray(x) - np.asarray(y)))) for x, y in zip(np.atleast_2d(a), np.atleast_2d(b)))
        print(f"{name:<20}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
