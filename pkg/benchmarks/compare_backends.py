#!/usr/bin/env python3
"""Time the numba kernels against the pure-NumPy fallback.

Covers the three hot paths: the banded dense generator inside the adaptive
loop, the quantum-jump trajectory sampler, and the CSR matvec driving the
two-mode pair. Both backends run in one process via use_backend(); the
numba pass runs once untimed to exclude JIT compilation.
"""

import argparse
import time

import numpy as np

import fockdamp as fd
from fockdamp._accel import HAVE_NUMBA
from fockdamp.twomode import TwoModeParams, product_with_vacuum, two_mode_evolve


def timed(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_dense(quick):
    cut = fd.FockCutoff(40)
    rho0 = fd.coherent_density(3.0, cut)
    grid = np.linspace(0.0, 20.0 if quick else 100.0, 101)
    cfg = fd.IntegratorConfig(1e-12, 1e-10)
    channels = [fd.nonlinear_loss(1.0), fd.linear_loss(0.025), fd.two_photon_loss(0.025)]

    def run():
        fd.evolve(rho0, channels, None, grid, cfg)

    return run


def bench_trajectories(quick):
    cut = fd.FockCutoff(40)
    psi0 = fd.coherent_state(3.0, cut)
    cfg = fd.TrajectoryConfig(
        n_traj=500 if quick else 2000, master_seed=7, t_grid=np.linspace(0, 20, 11)
    )
    channels = [fd.nonlinear_loss(1.0), fd.linear_loss(0.05)]

    def run():
        fd.run_ensemble(psi0, channels, None, cfg)

    return run


def bench_twomode(quick):
    params = TwoModeParams(u4=1.0, gamma_b=50.0, nmax_a=12, nmax_b=4)
    rho0 = product_with_vacuum(fd.coherent_density(1.5, fd.FockCutoff(12), tail_tol=1e-4), 4)
    t_max = 5.0 if quick else 12.5
    grid = np.linspace(0.0, t_max, 11)
    cfg = fd.IntegratorConfig(1e-10, 1e-8)

    def run():
        two_mode_evolve(rho0, params, grid, cfg)

    return run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    cases = [
        ("dense master equation (nmax=40)", bench_dense(args.quick)),
        ("trajectory ensemble", bench_trajectories(args.quick)),
        ("two-mode pair (13x5 basis)", bench_twomode(args.quick)),
    ]

    if not HAVE_NUMBA:
        print("numba is not importable; timing the NumPy fallback only\n")

    rows = []
    for label, run in cases:
        with fd.use_backend("numpy"):
            t_np = timed(run, args.repeats)
        if HAVE_NUMBA:
            with fd.use_backend("numba"):
                run()  # warm the JIT cache before timing
                t_nb = timed(run, args.repeats)
            rows.append((label, t_np, t_nb, t_np / t_nb))
        else:
            rows.append((label, t_np, None, None))

    width = max(len(r[0]) for r in rows)
    header = f"{'case':<{width}}  {'numpy [s]':>10}  {'numba [s]':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, t_np, t_nb, speed in rows:
        if t_nb is None:
            print(f"{label:<{width}}  {t_np:>10.4f}  {'-':>10}  {'-':>8}")
        else:
            print(f"{label:<{width}}  {t_np:>10.4f}  {t_nb:>10.4f}  {speed:>7.2f}x")


if __name__ == "__main__":
    main()
