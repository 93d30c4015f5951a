"""Dense convex QP solver.

Solves ``min 1/2 x'Px + q'x  s.t.  A_eq x = b_eq,  A_in x <= b_in`` with an
operator-splitting (ADMM) iteration over the stacked constraint set
``l <= A x <= u``, over-relaxation, adaptive step size and a final active-set
polish that solves the equality-constrained KKT system exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg, optimize

from ._accel import njit, pick

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 1000
TIKHONOV = 1e-9
SIGMA = 1e-6
ALPHA_RELAX = 1.6
EQ_RHO_SCALE = 1e3
CHECK_EVERY = 10
REFINE_AT = 200
INFEASIBLE = "infeasible"


@dataclass
class QpProblem:
    P: np.ndarray
    q: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_in: np.ndarray
    b_in: np.ndarray

    def __post_init__(self):
        self.P = np.atleast_2d(np.asarray(self.P, dtype=np.float64))
        self.q = np.asarray(self.q, dtype=np.float64).ravel()
        n = self.q.size
        self.A_eq = np.asarray(self.A_eq, dtype=np.float64).reshape(-1, n)
        self.b_eq = np.asarray(self.b_eq, dtype=np.float64).ravel()
        self.A_in = np.asarray(self.A_in, dtype=np.float64).reshape(-1, n)
        self.b_in = np.asarray(self.b_in, dtype=np.float64).ravel()
        if self.P.shape != (n, n):
            raise ValueError(f"P has shape {self.P.shape}, expected {(n, n)}")
        if self.A_eq.shape[0] != self.b_eq.size or self.A_in.shape[0] != self.b_in.size:
            raise ValueError("constraint matrices and right-hand sides disagree in row count")
        if np.max(np.abs(self.P - self.P.T), initial=0.0) > 1e-12 * max(1.0, np.abs(self.P).max(initial=0.0)):
            raise ValueError("P is not symmetric")

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def m_eq(self) -> int:
        return self.b_eq.size

    @property
    def m_in(self) -> int:
        return self.b_in.size

    def objective(self, x) -> float:
        return float(0.5 * x @ self.P @ x + self.q @ x)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("P", "q", "A_eq", "b_eq", "A_in", "b_in")}

    @classmethod
    def from_dict(cls, d: dict) -> "QpProblem":
        return cls(**{k: d[k] for k in ("P", "q", "A_eq", "b_eq", "A_in", "b_in")})

    def dump(self, path) -> None:
        """Write the problem as JSON (dense row-major arrays) for offline reproduction."""
        Path(path).write_text(json.dumps(self.to_dict()))


@dataclass
class KktResiduals:
    stationarity: float
    primal_eq: float
    primal_in: float
    complementarity: float

    def max(self) -> float:
        return max(self.stationarity, self.primal_eq, self.primal_in, self.complementarity)

    def within(self, tol: float) -> bool:
        return self.max() <= tol


@dataclass
class QpSolution:
    x: np.ndarray
    eq_multipliers: np.ndarray
    in_multipliers: np.ndarray
    status: str  # "optimal" | "max_iter" | "infeasible"
    kkt_residuals: KktResiduals
    iterations: int
    polished: bool = False

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _inf_norm(v) -> float:
    return float(np.max(np.abs(v), initial=0.0))


def kkt_residuals(problem: QpProblem, x, eq_multipliers, in_multipliers) -> KktResiduals:
    x = np.asarray(x, dtype=np.float64)
    lam = np.asarray(eq_multipliers, dtype=np.float64)
    mu = np.asarray(in_multipliers, dtype=np.float64)
    grad = problem.P @ x + problem.q + problem.A_eq.T @ lam + problem.A_in.T @ mu
    slack = problem.A_in @ x - problem.b_in
    return KktResiduals(
        stationarity=_inf_norm(grad),
        primal_eq=_inf_norm(problem.A_eq @ x - problem.b_eq),
        primal_in=_inf_norm(np.maximum(slack, 0.0)),
        complementarity=_inf_norm(mu * slack),
    )


# --------------------------------------------------------------------------
# ADMM kernel


def _admm_iterations_py(Minv, P, A, q, lo, hi, rho, sigma, alpha, x, z, y, n_iter):
    # Minv = (P + sigma I + A' diag(rho) A)^-1
    for _ in range(n_iter):
        rhs = sigma * x - q + A.T @ (rho * z - y)
        xt = Minv @ rhs
        zt = A @ xt
        x = alpha * xt + (1.0 - alpha) * x
        zr = alpha * zt + (1.0 - alpha) * z
        z = np.minimum(np.maximum(zr + y / rho, lo), hi)
        y = y + rho * (zr - z)
    return x, z, y


@njit
def _admm_iterations_nb(Minv, P, A, q, lo, hi, rho, sigma, alpha, x, z, y, n_iter):
    m = A.shape[0]
    for _ in range(n_iter):
        w = rho * z - y
        rhs = sigma * x - q + A.T @ w
        xt = Minv @ rhs
        zt = A @ xt
        x = alpha * xt + (1.0 - alpha) * x
        znew = np.empty(m)
        ynew = np.empty(m)
        for i in range(m):
            zr = alpha * zt[i] + (1.0 - alpha) * z[i]
            v = zr + y[i] / rho[i]
            if v < lo[i]:
                v = lo[i]
            elif v > hi[i]:
                v = hi[i]
            znew[i] = v
            ynew[i] = y[i] + rho[i] * (zr - v)
        z = znew
        y = ynew
    return x, z, y


_admm_iterations = pick(_admm_iterations_nb, _admm_iterations_py)


def _factor_inverse(P, A, rho, sigma):
    M = P + sigma * np.eye(P.shape[0]) + A.T @ (rho[:, None] * A)
    c = linalg.cho_factor(M, lower=True, check_finite=False)
    return np.ascontiguousarray(linalg.cho_solve(c, np.eye(P.shape[0]), check_finite=False))


# --------------------------------------------------------------------------
# scaling


def _ruiz(P, A, iters=15):
    """Diagonal equilibration of the KKT matrix; returns (D, E, c)."""
    n, m = P.shape[0], A.shape[0]
    D = np.ones(n)
    E = np.ones(m)
    Ps, As = P.copy(), A.copy()
    for _ in range(iters):
        col = np.maximum(np.abs(Ps).max(axis=0), np.abs(As).max(axis=0, initial=0.0))
        dd = 1.0 / np.sqrt(np.where(col > 1e-8, col, 1.0))
        ee = np.ones(m)
        if m:
            row = np.abs(As).max(axis=1)
            ee = 1.0 / np.sqrt(np.where(row > 1e-8, row, 1.0))
        Ps = dd[:, None] * Ps * dd[None, :]
        As = ee[:, None] * As * dd[None, :]
        D *= dd
        E *= ee
    c = 1.0 / max(np.abs(Ps).max(axis=0).mean(), 1e-8)
    c = min(max(c, 1e-4), 1e4)
    return D, E, c


# --------------------------------------------------------------------------
# polishing


def _solve_active(problem: QpProblem, A, rhs_b, active, n_eq, x_ref, y_ref=None, col_scale=None):
    """Equality-constrained QP on the active rows by the null-space method.

    P may be singular, so among minimizers the one nearest ``x_ref`` is taken.
    ``col_scale`` is a diagonal variable scaling used only for conditioning.
    """
    n = problem.n
    d = np.ones(n) if col_scale is None else col_scale
    idx = np.flatnonzero(active)
    Aa = A[idx] * d[None, :]
    b = rhs_b[idx]
    Ps = d[:, None] * problem.P * d[None, :]
    qs = d * problem.q
    wref = np.asarray(x_ref, dtype=np.float64) / d
    if idx.size:
        U, sv, Vt = linalg.svd(Aa, full_matrices=True, check_finite=False)
        r = int(np.sum(sv > sv[0] * 1e-12)) if sv.size else 0
        xp = Vt[:r].T @ ((U[:, :r].T @ b) / sv[:r])
        Z = Vt[r:].T
    else:
        xp = np.zeros(n)
        Z = np.eye(n)
    if Z.shape[1]:
        H = Z.T @ Ps @ Z
        w0 = Z.T @ (wref - xp)
        g = Z.T @ (Ps @ (xp + Z @ w0) + qs)
        dw = linalg.lstsq(H, -g, cond=1e-10, check_finite=False)[0]
        xs = xp + Z @ (w0 + dw)
    else:
        xs = xp
    if not np.all(np.isfinite(xs)):
        return None
    y = np.zeros(A.shape[0])
    if idx.size:
        y[idx] = linalg.lstsq(Aa.T, -(Ps @ xs + qs), cond=1e-13, check_finite=False)[0]
    return d * xs, y


def _polish(problem: QpProblem, A, hi, z, y, n_eq, tol, x0, col_scale=None):
    """Single equality-KKT solve on the active set guessed from the ADMM iterate."""
    active = np.zeros(A.shape[0], dtype=bool)
    active[:n_eq] = True
    active[n_eq:] = (hi[n_eq:] - z[n_eq:]) < y[n_eq:]
    out = _solve_active(problem, A, hi, active, n_eq, x0, col_scale=col_scale)
    if out is None:
        return None
    xp, yp = out
    if np.any(yp[n_eq:] < 0.0) or np.any(A[n_eq:] @ xp - hi[n_eq:] > tol):
        return None
    return xp, yp


def _feasible_start(problem: QpProblem, x_near):
    """Feasible point closest to ``x_near`` in the 1-norm (an LP).

    Returns INFEASIBLE when the LP proves the constraint set empty, None on
    any other LP failure.
    """
    n = problem.n
    c = np.concatenate([np.zeros(n), np.ones(n)])
    eye = np.eye(n)
    A_ub = np.vstack([
        np.hstack([problem.A_in, np.zeros((problem.m_in, n))]),
        np.hstack([eye, -eye]),
        np.hstack([-eye, -eye]),
    ])
    b_ub = np.concatenate([problem.b_in, x_near, -x_near])
    A_eq = np.hstack([problem.A_eq, np.zeros((problem.m_eq, n))]) if problem.m_eq else None
    res = optimize.linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=problem.b_eq if problem.m_eq else None,
                           bounds=(None, None), method="highs")
    if res.status == 2:
        return INFEASIBLE
    if res.status != 0:
        return None
    return res.x[:n]


def _refine(problem: QpProblem, A, hi, n_eq, x_near, col_scale, max_steps=None):
    """Primal active-set method from a feasible point near the ADMM iterate.

    Each step minimizes over the working set; zero-curvature descent directions
    (P is only semidefinite) are followed until a constraint blocks.
    Returns (x, y) or None.
    """
    n = problem.n
    d = np.ones(n) if col_scale is None else col_scale
    x = _feasible_start(problem, x_near)
    if x is None or x is INFEASIBLE:
        return x
    As = A * d[None, :]
    Ps = d[:, None] * problem.P * d[None, :]
    qs = d * problem.q
    xs = x / d
    pscale = max(1.0, _inf_norm(Ps))
    # working set: equalities plus a linearly independent subset of tight rows
    work = list(range(n_eq))
    slack = As[n_eq:] @ xs - hi[n_eq:]
    for j in np.argsort(-slack):
        if slack[j] < -1e-10:
            break
        cand = work + [n_eq + j]
        if np.linalg.matrix_rank(As[cand], tol=1e-9 * max(1.0, _inf_norm(As[cand]))) == len(cand):
            work = cand
    if max_steps is None:
        max_steps = 20 * (n + A.shape[0])
    for _ in range(max_steps):
        W = np.asarray(work, dtype=int)
        g = Ps @ xs + qs
        if W.size:
            _, sv, Vt = linalg.svd(As[W], full_matrices=True, check_finite=False)
            r = int(np.sum(sv > sv[0] * 1e-12))
            Z = Vt[r:].T
        else:
            Z = np.eye(n)
        p = np.zeros(n)
        if Z.shape[1]:
            H = Z.T @ Ps @ Z
            gz = Z.T @ g
            evals, evecs = np.linalg.eigh(H)
            flat = evals <= 1e-10 * max(1.0, evals.max(initial=0.0))
            g_flat = evecs[:, flat].T @ gz
            if _inf_norm(g_flat) > 1e-12 * pscale:
                # linear descent along a zero-curvature direction
                p = -Z @ (evecs[:, flat] @ g_flat)
                unbounded_ok = False
            else:
                keep = ~flat
                w = -evecs[:, keep] @ ((evecs[:, keep].T @ gz) / evals[keep])
                p = Z @ w
                unbounded_ok = True
        if _inf_norm(p) <= 1e-14 * max(1.0, _inf_norm(xs)):
            if not W.size:
                return d * xs, np.zeros(A.shape[0])
            lam = linalg.lstsq(As[W].T, -g, check_finite=False)[0]
            mu_w = lam[W >= n_eq]
            if mu_w.size == 0 or mu_w.min() >= -1e-12 * pscale:
                y = np.zeros(A.shape[0])
                y[W] = lam
                y[n_eq:] = np.maximum(y[n_eq:], 0.0)
                return d * xs, y
            k = int(np.flatnonzero(W >= n_eq)[np.argmin(mu_w)])
            work.pop(k)
            continue
        # ratio test over rows outside the working set
        Ap = As[n_eq:] @ p
        sl = hi[n_eq:] - As[n_eq:] @ xs
        inw = np.zeros(problem.m_in, dtype=bool)
        inw[W[W >= n_eq] - n_eq] = True
        cand = (~inw) & (Ap > 1e-14 * max(1.0, _inf_norm(Ap)))
        steps = np.where(cand, np.maximum(sl, 0.0) / np.where(cand, Ap, 1.0), np.inf)
        j = int(np.argmin(steps)) if steps.size else -1
        t_block = steps[j] if steps.size else np.inf
        if unbounded_ok:
            t = min(1.0, t_block)
        else:
            if not np.isfinite(t_block):
                return None  # unbounded below along a flat direction
            t = t_block
        xs = xs + t * p
        if t_block <= t and np.isfinite(t_block):
            work.append(n_eq + j)
    return None


def _refined_solution(problem, A, hi, n_eq, x_near, D, tol, it):
    out = _refine(problem, A, hi, n_eq, x_near, D)
    if out is INFEASIBLE:
        return INFEASIBLE
    if out is None:
        return None
    xp, yp = out
    lam, mu = yp[:n_eq].copy(), yp[n_eq:].copy()
    res = kkt_residuals(problem, xp, lam, mu)
    if not res.within(tol):
        return None
    return QpSolution(xp, lam, mu, "optimal", res, it, polished=True)


def _split(y, n_eq):
    return y[:n_eq].copy(), np.maximum(y[n_eq:], 0.0)


# --------------------------------------------------------------------------
# driver


def solve_qp(problem: QpProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
             rho: float = 0.1) -> QpSolution:
    """Solve the QP; ``status == "optimal"`` guarantees every KKT residual <= ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    n, n_eq, n_in = problem.n, problem.m_eq, problem.m_in
    A = np.ascontiguousarray(np.vstack([problem.A_eq, problem.A_in]))
    lo = np.concatenate([problem.b_eq, np.full(n_in, -np.inf)])
    hi = np.concatenate([problem.b_eq, problem.b_in])
    m = A.shape[0]

    # ADMM runs on the equilibrated problem; every test uses the original one
    D, E, c = _ruiz(problem.P, A)
    Ps = np.ascontiguousarray(c * (D[:, None] * problem.P * D[None, :]) + TIKHONOV * np.eye(n))
    qs = c * D * problem.q
    As = np.ascontiguousarray(E[:, None] * A * D[None, :])
    los, his = E * lo, E * hi

    rho_vec = np.full(m, rho)
    rho_vec[:n_eq] *= EQ_RHO_SCALE
    Minv = _factor_inverse(Ps, As, rho_vec, SIGMA)
    xs = np.zeros(n)
    zs = np.clip(As @ xs, los, his) if m else np.zeros(0)
    ys = np.zeros(m)

    best = None
    it = 0
    status = "max_iter"
    polish_every = 5 * CHECK_EVERY
    while it < max_iter:
        k = min(CHECK_EVERY, max_iter - it)
        ys_prev = ys
        xs, zs, ys = _admm_iterations(Minv, Ps, As, qs, los, his, rho_vec, SIGMA, ALPHA_RELAX, xs, zs, ys, k)
        it += k
        x = D * xs
        z = zs / E if m else zs
        y = E * ys / c
        Ax = A @ x
        r_prim = _inf_norm(Ax - z)
        r_dual = _inf_norm(problem.P @ x + problem.q + A.T @ y)
        score = max(r_prim, r_dual)
        if best is None or score < best[0]:
            best = (score, x.copy(), y.copy(), z.copy())

        dy = E * (ys - ys_prev) / c
        ndy = _inf_norm(dy)
        if m and ndy > 1e-12:
            eps_inf = 1e-6
            in_ok = n_in == 0 or dy[n_eq:].min() >= -eps_inf * ndy
            lin = problem.b_eq @ dy[:n_eq] + problem.b_in @ np.maximum(dy[n_eq:], 0.0)
            if in_ok and _inf_norm(A.T @ dy) <= eps_inf * ndy and lin < -eps_inf * ndy:
                status = "infeasible"
                break

        if r_prim <= tol and r_dual <= tol:
            lam, mu = _split(y, n_eq)
            res = kkt_residuals(problem, x, lam, mu)
            if res.within(tol):
                return QpSolution(x.copy(), lam, mu, "optimal", res, it)
        if it % polish_every == 0 or it >= max_iter or score < 1e3 * tol:
            pol = _polish(problem, A, hi, z, y, n_eq, tol, x0=x, col_scale=D)
            if pol is not None:
                xp, yp = pol
                lam, mu = yp[:n_eq].copy(), yp[n_eq:].copy()
                res = kkt_residuals(problem, xp, lam, mu)
                if res.within(tol):
                    return QpSolution(xp, lam, mu, "optimal", res, it, polished=True)
        if it == REFINE_AT and it < max_iter:
            sol = _refined_solution(problem, A, hi, n_eq, best[1], D, tol, it)
            if sol is INFEASIBLE:
                status = "infeasible"
                break
            if sol is not None:
                return sol

        if m:
            pn = _inf_norm(As @ xs - zs) / max(_inf_norm(As @ xs), _inf_norm(zs), 1e-30)
            dn = _inf_norm(Ps @ xs + qs + As.T @ ys) / max(
                _inf_norm(Ps @ xs), _inf_norm(As.T @ ys), _inf_norm(qs), 1e-30)
            if pn > 0 and dn > 0:
                scale = np.sqrt(pn / dn)
                if scale > 5.0 or scale < 0.2:
                    rho_vec = np.clip(rho_vec * scale, 1e-6, 1e6 * EQ_RHO_SCALE)
                    Minv = _factor_inverse(Ps, As, rho_vec, SIGMA)

    if best is None:
        best = (np.inf, D * xs, E * ys / c, zs / E if m else zs)
    _, xb, yb, zb = best
    if status != "infeasible":
        sol = _refined_solution(problem, A, hi, n_eq, xb, D, tol, it)
        if sol is INFEASIBLE:
            status = "infeasible"
        elif sol is not None:
            return sol
    lam, mu = _split(yb, n_eq)
    return QpSolution(xb.copy(), lam, mu, status, kkt_residuals(problem, xb, lam, mu), it)
