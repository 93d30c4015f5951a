"""The numba loop kernels and the numpy kernels must agree."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybrid_planner import _accel, env, minsnap, qp


def _random_world(rng, n):
    pos = rng.uniform(-1.0, 1.0, (n, 2))
    if n > 1:
        # push one pair into contact so every reward branch shows up
        pos[1] = pos[0] + rng.normal(0, 0.05, 2)
    vel = rng.uniform(-0.3, 0.3, (n, 2))
    goals = pos + rng.normal(0, 0.1, (n, 2))
    reached = rng.random(n) < 0.2
    prev_d = np.linalg.norm(goals - pos, axis=1)
    actions = rng.uniform(-3.0, 3.0, (n, 2))
    return pos, vel, goals, reached, prev_d, actions


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_step_kernels_agree(seed, n):
    rng = np.random.default_rng(seed)
    args = _random_world(rng, n) + (0.1, 0.5, 1.0, 1.2, 0.15, 0.05, 0.1)
    a = env._step_loop(*args)
    b = env._step_vec(*[x.copy() if isinstance(x, np.ndarray) else x for x in args])
    for u, v in zip(a[:5], b[:5]):
        np.testing.assert_allclose(u, v, rtol=0, atol=1e-14)
    assert a[5] == b[5]


def test_step_kernels_leave_inputs_alone():
    rng = np.random.default_rng(0)
    world = _random_world(rng, 4)
    before = [x.copy() for x in world]
    for kernel in (env._step_loop, env._step_vec):
        kernel(*world, 0.1, 0.5, 1.0, 1.2, 0.15, 0.05, 0.1)
        for x, y in zip(world, before):
            np.testing.assert_array_equal(x, y)


@given(st.integers(0, 2**32 - 1))
def test_admm_kernels_agree(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(2, 10)), int(rng.integers(1, 12))
    M = rng.standard_normal((n, n))
    P = M @ M.T + 0.1 * np.eye(n)
    A = rng.standard_normal((m, n))
    rho = np.full(m, 0.1)
    sigma = 1e-6
    Minv = np.linalg.inv(P + sigma * np.eye(n) + A.T @ (rho[:, None] * A))
    q = rng.standard_normal(n)
    lo = -rng.uniform(0.5, 2.0, m)
    hi = rng.uniform(0.5, 2.0, m)
    init = (np.zeros(n), np.zeros(m), np.zeros(m))
    a = qp._admm_iterations_nb(Minv, P, A, q, lo, hi, rho, sigma, 1.6, *init, 50)
    b = qp._admm_iterations_py(Minv, P, A, q, lo, hi, rho, sigma, 1.6, *init, 50)
    for u, v in zip(a, b):
        np.testing.assert_allclose(u, v, rtol=1e-9, atol=1e-11)


@given(st.integers(0, 2**32 - 1), st.integers(0, 4))
def test_eval_kernels_agree(seed, d):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 6))
    coeffs = rng.standard_normal((k, 8))
    times = np.concatenate([[0.0], np.cumsum(rng.uniform(0.1, 1.0, k))])
    t = np.sort(rng.uniform(0.0, times[-1], 40))
    t = np.concatenate([times, t])
    a = minsnap._eval_loop(coeffs, times, t, d)
    b = minsnap._eval_vec(coeffs, times, t, d)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@pytest.mark.skipif(not _accel.HAS_NUMBA, reason="numba not installed")
def test_active_path_follows_flag():
    assert (env._step_kernel is env._step_loop) == _accel.USE_NUMBA
    assert (qp._admm_iterations is qp._admm_iterations_nb) == _accel.USE_NUMBA
    assert (minsnap._eval_kernel is minsnap._eval_loop) == _accel.USE_NUMBA


def test_flag_disables_numba(monkeypatch):
    import importlib

    monkeypatch.setenv("HYBRID_PLANNER_NUMBA", "0")
    mod = importlib.reload(_accel)
    try:
        assert mod.USE_NUMBA is False
        assert mod.pick("fast", "slow") == "slow"
    finally:
        monkeypatch.delenv("HYBRID_PLANNER_NUMBA")
        importlib.reload(_accel)
