"""Reference computations used only by the tests.

Each one is coded independently of the package: a textbook primal
active-set QP solver, quadrature for the snap Hessian, the closed-form
rest-to-rest quintic and central finite differences.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate


def active_set_qp(P, q, A_eq, b_eq, A_in, b_in, x0, max_iter=500, tol=1e-12):
    """Primal active-set method for a strictly convex QP from a feasible ``x0``.

    Each iteration solves the equality-constrained subproblem on the working
    set through its full KKT matrix.  Returns ``x``.
    """
    P = np.asarray(P, float)
    q = np.asarray(q, float)
    A_eq = np.asarray(A_eq, float).reshape(-1, q.size)
    A_in = np.asarray(A_in, float).reshape(-1, q.size)
    b_in = np.asarray(b_in, float)
    n, me = q.size, A_eq.shape[0]
    x = np.asarray(x0, float).copy()
    work: list[int] = [i for i in range(A_in.shape[0]) if abs(A_in[i] @ x - b_in[i]) <= 1e-12]
    at_min = False  # set after a full unblocked step: x minimizes on the working set

    for _ in range(max_iter):
        Aw = np.vstack([A_eq, A_in[work]]) if work else A_eq
        mw = Aw.shape[0]
        K = np.zeros((n + mw, n + mw))
        K[:n, :n] = P
        K[:n, n:] = Aw.T
        K[n:, :n] = Aw
        g = P @ x + q
        sol = np.linalg.lstsq(K, np.concatenate([-g, np.zeros(mw)]), rcond=None)[0]
        p, lam = sol[:n], sol[n:]
        if at_min or np.max(np.abs(p)) <= 1e-10 * (1.0 + np.max(np.abs(x))):
            at_min = False
            mu = lam[me:]
            if mu.size == 0 or mu.min() >= -tol:
                return x
            work.pop(int(np.argmin(mu)))
            continue
        # longest feasible step along p
        alpha, block = 1.0, None
        for i in range(A_in.shape[0]):
            if i in work:
                continue
            ap = A_in[i] @ p
            if ap > 1e-15:
                s = (b_in[i] - A_in[i] @ x) / ap
                if s < alpha:
                    alpha, block = max(s, 0.0), i
        x = x + alpha * p
        if block is not None:
            work.append(block)
        else:
            at_min = True
    raise RuntimeError("active-set oracle did not converge")


def random_qp(rng, n_max=20):
    """Strictly convex QP with a strictly feasible point; returns (arrays, x_feasible)."""
    n = int(rng.integers(2, n_max + 1))
    me = int(rng.integers(0, n // 2 + 1))
    mi = int(rng.integers(0, 2 * n + 1))
    M = rng.standard_normal((n, n))
    P = M @ M.T + 0.1 * np.eye(n)
    q = rng.standard_normal(n)
    x0 = rng.standard_normal(n)
    A_eq = rng.standard_normal((me, n))
    b_eq = A_eq @ x0
    A_in = rng.standard_normal((mi, n))
    b_in = A_in @ x0 + rng.uniform(0.0, 1.0, mi)
    return (P, q, A_eq, b_eq, A_in, b_in), x0


def snap_hessian_quad(n: int, t_a: float, t_b: float) -> np.ndarray:
    """Entry (r, c) = integral of the 4th derivatives of t^r and t^c."""
    def d4(k, t):
        return 0.0 if k < 4 else math.perm(k, 4) * t ** (k - 4)

    Q = np.zeros((n + 1, n + 1))
    for r in range(n + 1):
        for c in range(n + 1):
            Q[r, c] = integrate.quad(lambda t: d4(r, t) * d4(c, t), t_a, t_b,
                                     epsabs=0.0, epsrel=1e-13, limit=200)[0]
    return Q


def quintic_rest_to_rest(p0: float, p1: float, T: float, t):
    """Minimum-snap optimum between rest states: the smoothstep quintic."""
    s = np.asarray(t, float) / T
    return p0 + (p1 - p0) * (10 * s**3 - 15 * s**4 + 6 * s**5)


def central_diff(f, arrays, h=1e-5):
    """Finite-difference gradient of scalar ``f()`` w.r.t. each array (mutated in place)."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = a[idx]
            a[idx] = old + h
            fp = f()
            a[idx] = old - h
            fm = f()
            a[idx] = old
            g[idx] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads


def rel_err(a, b) -> float:
    a = np.asarray(a, float).ravel()
    b = np.asarray(b, float).ravel()
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-8))


def random_waypoint_path(rng, steps=None, dt=0.1, v_max=1.0, a_max=1.0):
    """Front-end-like waypoints: a point robot steering to a random goal with noisy accelerations."""
    p = rng.uniform(-1.7, 1.7, 2)
    ang = rng.uniform(0, 2 * np.pi)
    goal = np.clip(p + rng.uniform(1.0, 3.0) * np.array([np.cos(ang), np.sin(ang)]), -1.75, 1.75)
    v = np.zeros(2)
    pts = [p.copy()]
    steps = int(rng.integers(15, 51)) if steps is None else steps
    for _ in range(steps):
        a = 2.0 * (goal - p) - 2.0 * v + rng.normal(0, 0.6, 2)
        a = np.clip(a, -a_max, a_max)
        v = v + a * dt
        s = np.linalg.norm(v)
        if s > v_max:
            v *= v_max / s
        p = p + v * dt
        pts.append(p.copy())
        if np.linalg.norm(goal - p) < 0.1:
            break
    return np.array(pts)
