"""Numba vs plain numpy timing for the simulator kernels.

    python benchmarks/bench_sim.py [--steps N] [--repeat R]

The jitted and plain versions are the same source; the last column is the
largest relative difference between their outputs (floating-point
reassociation inside the compiled dot products makes it nonzero).
"""
import argparse
import time

import numpy as np

from whsyn import _accel
from whsyn.constraints import WHConstraint, build_graph
from whsyn.lifting import StrategyPair
from whsyn.plants import pendulum_lqr, pendulum_surrogate
from whsyn.sim import _kernels


def best_of(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if not _accel.USE_NUMBA:
        print("numba disabled (WHSYN_DISABLE_NUMBA set); nothing to compare")
        return 0

    plant = pendulum_surrogate()
    c = WHConstraint.any_miss(3, 5)
    g = build_graph(c)
    K = pendulum_lqr(plant) * 0.5
    gains = np.ascontiguousarray(np.stack([K] * g.n_nodes))
    trans = g.transition_table()
    rng = np.random.Generator(np.random.PCG64(0))
    N = args.steps
    draws = rng.random(N)
    w = 1e-3 * rng.standard_normal((N, plant.q))
    x0 = np.array([0.05, 0.0, 0.0])
    u0 = np.zeros(plant.m)
    sp = StrategyPair.parse("Kill+Hold")
    mats = [np.array(M, dtype=float, order="C") for M in (plant.A, plant.B, plant.Bw, plant.C, plant.D, plant.Dw)]

    mu = _kernels.gen_mu(c.k, c.s, 0.3, draws, 0)  # also compiles

    def sim(fn):
        return lambda: fn(*mats, gains, trans, g.initial, mu, w, x0, u0, False, True, 0.0, N)

    sim(_kernels.step_sim)()  # compile outside the timing

    rows = []
    for name, jit_fn, py_fn, make in [
        ("gen_mu", _kernels.gen_mu, _kernels.gen_mu_py, lambda f: lambda: f(c.k, c.s, 0.3, draws, 0)),
        ("window_max_zeros", _kernels.window_max_zeros, _kernels.window_max_zeros_py,
         lambda f: lambda: f(mu, c.s)),
        ("step_sim", _kernels.step_sim, _kernels.step_sim_py, sim),
    ]:
        tj, oj = best_of(make(jit_fn), args.repeat)
        tp, op = best_of(make(py_fn), 1)
        pairs = zip(oj, op) if isinstance(oj, tuple) else [(oj, op)]
        diff = 0.0
        for a, b in pairs:
            a, b = np.nan_to_num(np.asarray(a, dtype=float)), np.nan_to_num(np.asarray(b, dtype=float))
            diff = max(diff, float(np.max(np.abs(a - b) / (1 + np.abs(b)), initial=0.0)))
        rows.append((name, tp, tj, diff))

    print(f"steps={N}")
    print(f"{'kernel':<18} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8}  {'max rel diff':>12}")
    for name, tp, tj, diff in rows:
        print(f"{name:<18} {tp:>10.4f} {tj:>10.4f} {tp / tj:>8.1f}  {diff:>12.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
