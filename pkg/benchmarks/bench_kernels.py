"""Time the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both implementations are imported side by side, so the environment flag does
not matter here.  The first numba call (compilation) is excluded.
"""

import argparse
import time

import numpy as np

from hybrid_planner import _accel, env, minsnap, qp


def _time(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    rng = np.random.default_rng(0)

    n = 3
    pos = rng.uniform(-1, 1, (n, 2))
    vel = np.zeros((n, 2))
    goals = rng.uniform(-1, 1, (n, 2))
    reached = np.zeros(n, dtype=bool)
    prev_d = np.linalg.norm(goals - pos, axis=1)
    act = rng.uniform(-1, 1, (n, 2))
    step_args = (pos, vel, goals, reached, prev_d, act, 0.1, 0.5, 1.0, 1.2, 0.15, 0.05, 0.1)

    def steps(kernel):
        return lambda: [kernel(*step_args) for _ in range(2000)]

    nv, m = 48, 120
    M = rng.standard_normal((nv, nv))
    P = M @ M.T + np.eye(nv)
    A = rng.standard_normal((m, nv))
    rho = np.full(m, 0.1)
    Minv = np.linalg.inv(P + 1e-6 * np.eye(nv) + A.T @ (rho[:, None] * A))
    q = rng.standard_normal(nv)
    lo, hi = -np.ones(m), np.ones(m)
    admm_args = (Minv, P, A, q, lo, hi, rho, 1e-6, 1.6, np.zeros(nv), np.zeros(m), np.zeros(m), 500)

    coeffs = rng.standard_normal((30, 8))
    times = np.concatenate([[0.0], np.cumsum(rng.uniform(0.2, 0.5, 30))])
    t = np.linspace(0.0, times[-1], 5000)

    return [
        ("env step x2000 (3 robots)", steps(env._step_loop), steps(env._step_vec)),
        ("admm 500 iters (48 vars, 120 rows)",
         lambda: qp._admm_iterations_nb(*admm_args), lambda: qp._admm_iterations_py(*admm_args)),
        ("poly eval 5000 samples, 30 segments",
         lambda: [minsnap._eval_loop(coeffs, times, t, d) for d in range(3)],
         lambda: [minsnap._eval_vec(coeffs, times, t, d) for d in range(3)]),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.HAS_NUMBA:
        print("numba is not installed; both columns time the python path")
    print(f"{'kernel':40s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name, fast, slow in cases():
        a = _time(fast, args.repeat) * 1e3
        b = _time(slow, args.repeat) * 1e3
        print(f"{name:40s} {a:10.2f} {b:10.2f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()
