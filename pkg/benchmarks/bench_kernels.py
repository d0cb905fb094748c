#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the two hot kernels (the RK4 step and the fused
objective/gradient evaluation) on a representative 15-stage problem and
prints a per-call comparison. Run from the repository root:

    python3 benchmarks/bench_kernels.py [--repeats N]

The numba timings exclude JIT compilation (a warm-up call is made
first). If numba is not importable only the numpy backend is timed.
"""
import argparse
import timeit

import numpy as np

from coopnmpc import kernels_numpy

try:
    from coopnmpc import kernels_numba
except ImportError:
    kernels_numba = None


def make_problem(n=15, seed=0):
    rng = np.random.default_rng(seed)
    seg_lo = np.array([-50.0, 150.0])
    seg_hi = np.array([150.0, 400.0])
    seg_k = np.array([0.0, 0.005])
    xi = rng.normal(scale=0.3, size=6 * n)
    xi[0::6] = 14.0 * 0.1 * np.arange(1, n + 1)  # s grows along the horizon
    xi[3::6] += 14.0                             # v near the reference speed
    x0 = np.array([6.0, -2.0, 0.0, 14.0])
    refs = np.zeros((n + 1, 4))
    refs[:, 0] = 6.0 + 14.0 * 0.1 * np.arange(n + 1)
    refs[:, 1] = -2.0
    refs[:, 3] = 14.0
    return dict(
        xi=xi, x0=x0, ts=0.1, seg_lo=seg_lo, seg_hi=seg_hi, seg_k=seg_k,
        lf=1.4, lr=1.4,
        q=np.array([0.0, 1.0, 100.0, 1.0]),
        qN=np.array([0.0, 1.0, 100.0, 1.0]),
        r=np.array([1.0, 600.0]),
        refs=refs,
        z=xi[0::6].copy(), lam=rng.normal(size=n), rho=100.0,
        mu=rng.normal(size=4 * n), alpha=100.0,
        ay_hi=3.5, atot_hi=4.0,
    )


def bench(label, fn, repeats):
    fn()  # warm-up (triggers JIT compilation on the numba backend)
    dt = min(timeit.repeat(fn, number=repeats, repeat=5)) / repeats
    print(f"  {label:<28s} {dt * 1e6:10.2f} us/call")
    return dt


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=2000,
                    help="calls per timing sample (default 2000)")
    args = ap.parse_args()
    p = make_problem()

    def obj(mod):
        return lambda: mod.objective_and_grad(
            p["xi"], True, p["x0"], p["ts"], p["seg_lo"], p["seg_hi"],
            p["seg_k"], p["lf"], p["lr"], p["q"], p["qN"], p["r"],
            p["refs"], p["z"], p["lam"], p["rho"], p["mu"], p["alpha"],
            p["ay_hi"], p["atot_hi"])

    def rk4(mod):
        return lambda: mod.rk4_step_arr(
            p["x0"], 1.0, 0.02, p["ts"], p["seg_lo"], p["seg_hi"],
            p["seg_k"], p["lf"], p["lr"])

    backends = [("numpy", kernels_numpy)]
    if kernels_numba is not None:
        backends.append(("numba", kernels_numba))
    else:
        print("numba not importable; timing the numpy backend only")

    results = {}
    for name, mod in backends:
        print(f"{name} backend:")
        results[name] = {
            "objective_and_grad": bench("objective_and_grad", obj(mod),
                                        args.repeats),
            "rk4_step": bench("rk4_step", rk4(mod), args.repeats),
        }

    if len(results) == 2:
        print("speedup (numpy / numba):")
        for k in results["numpy"]:
            ratio = results["numpy"][k] / results["numba"][k]
            print(f"  {k:<28s} {ratio:10.1f}x")


if __name__ == "__main__":
    main()
