import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hybrid_planner import nn
from oracles import central_diff, rel_err


def test_init_deterministic():
    a = nn.mlp_init([12, 500, 128, 4], 1)
    b = nn.mlp_init([12, 500, 128, 4], 1)
    assert a.digest() == b.digest()
    assert [w.shape for w in a.weights] == [(12, 500), (500, 128), (128, 4)]


def test_init_rejects_bad_sizes():
    with pytest.raises(ValueError):
        nn.mlp_init([3], 0)
    with pytest.raises(ValueError):
        nn.mlp_init([3, 0, 2], 0)


def test_zero_network_gives_zero():
    p = nn.mlp_init([3, 5, 2], 0)
    for a in p.arrays():
        a[...] = 0.0
    out, _ = nn.mlp_forward(p, np.array([1.0, -2.0, 3.0]))
    np.testing.assert_array_equal(out, np.zeros(2))


def test_identity_layer():
    p = nn.mlp_init([3, 3], 0)
    p.weights[0][...] = np.eye(3)
    x = np.array([0.5, -1.0, 2.0])
    np.testing.assert_array_equal(nn.mlp_forward(p, x)[0], x)
    np.testing.assert_array_equal(nn.mlp_apply(p, x), x)


def test_zero_upstream_gradient():
    p = nn.mlp_init([4, 6, 3], 2)
    out, cache = nn.mlp_forward(p, np.ones((5, 4)))
    g = nn.mlp_backward(p, cache, np.zeros_like(out))
    assert all(np.all(a == 0.0) for a in g.arrays())


def test_stale_cache_rejected():
    p = nn.mlp_init([2, 3, 1], 0)
    out, cache = nn.mlp_forward(p, np.ones(2))
    g = nn.mlp_backward(p, cache, np.ones(1))
    nn.adam_update(p, g, nn.adam_init(p.arrays()), 1e-3)
    with pytest.raises(ValueError):
        nn.mlp_backward(p, cache, np.ones(1))


@given(st.integers(0, 10_000))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    p = nn.mlp_init([5, 7, 6, 3], seed)
    for b in p.biases:
        b[...] = rng.normal(0, 0.3, b.shape)
    x = rng.standard_normal((4, 5))
    w = rng.standard_normal((4, 3))

    def f():
        return float(np.sum(w * nn.mlp_apply(p, x)))

    out, cache = nn.mlp_forward(p, x)
    g = nn.mlp_backward(p, cache, w)
    fd = central_diff(f, p.arrays() + [x])
    for analytic, numeric in zip(g.arrays() + [g.input], fd):
        assert rel_err(analytic, numeric) < 1e-4


def test_squashed_gaussian_zero_noise():
    head = nn.ActorHeadOutput(np.array([0.3, -0.7]), np.array([0.1, -0.2]))
    a, _ = nn.squashed_gaussian(head, np.zeros(2))
    np.testing.assert_allclose(a, np.tanh([0.3, -0.7]))


def test_squashed_gaussian_standard_density():
    head = nn.ActorHeadOutput(np.zeros(2), np.zeros(2))
    a, logp = nn.squashed_gaussian(head, np.zeros(2))
    np.testing.assert_array_equal(a, [0.0, 0.0])
    # the guard adds log(1 + 1e-6) per component
    assert logp == pytest.approx(-1.837877, abs=5e-6)
    assert logp == pytest.approx(-math.log(2 * math.pi) - 2 * math.log1p(nn.EPS_NUM), abs=1e-12)


@given(
    hnp.arrays(np.float64, 4, elements=st.floats(-50, 50)),
    hnp.arrays(np.float64, 2, elements=st.floats(-6, 6)),
)
def test_squashed_gaussian_properties(raw, eps):
    head = nn.split_head(raw)
    assert np.all(head.log_sigma >= nn.LOG_SIGMA_MIN) and np.all(head.log_sigma <= nn.LOG_SIGMA_MAX)
    a, logp = nn.squashed_gaussian(head, eps)
    assert np.all(np.abs(a) <= 1.0)
    assert np.isfinite(logp)


def test_squashed_gaussian_interior_for_moderate_inputs():
    rng = np.random.default_rng(0)
    head = nn.ActorHeadOutput(rng.normal(0, 2, (1000, 2)), rng.uniform(-3, 1, (1000, 2)))
    a, _ = nn.squashed_gaussian(head, rng.standard_normal((1000, 2)))
    assert np.all(np.abs(a) < 1.0)


def test_squashed_gaussian_grads_fd():
    rng = np.random.default_rng(3)
    mu = rng.normal(size=2)
    ls = rng.normal(scale=0.3, size=2)
    eps = rng.normal(size=2)
    head = nn.ActorHeadOutput(mu, ls, ls.copy())
    a, _ = nn.squashed_gaussian(head, eps)
    da_dmu, da_dls, dlp_dmu, dlp_dls = nn.squashed_gaussian_grads(head, eps, a)

    def logp():
        return float(nn.squashed_gaussian(nn.ActorHeadOutput(mu, ls), eps)[1])

    fd_mu, fd_ls = central_diff(logp, [mu, ls], h=1e-6)
    assert rel_err(dlp_dmu, fd_mu) < 1e-5
    assert rel_err(dlp_dls, fd_ls) < 1e-5
    for k in range(2):
        def ak():
            return float(nn.squashed_gaussian(nn.ActorHeadOutput(mu, ls), eps)[0][k])
        fm, fl = central_diff(ak, [mu, ls], h=1e-6)
        assert da_dmu[k] == pytest.approx(fm[k], rel=1e-5)
        assert da_dls[k] == pytest.approx(fl[k], rel=1e-5, abs=1e-10)


def test_clamped_log_sigma_has_no_gradient():
    head = nn.split_head(np.array([0.0, 0.0, 5.0, -30.0]))
    a, _ = nn.squashed_gaussian(head, np.ones(2))
    _, da_dls, _, dlp_dls = nn.squashed_gaussian_grads(head, np.ones(2), a)
    np.testing.assert_array_equal(da_dls, 0.0)
    np.testing.assert_array_equal(dlp_dls, 0.0)


def test_adam_zero_gradient():
    p = nn.mlp_init([3, 4, 2], 0)
    before = p.digest()
    st_ = nn.adam_init(p.arrays())
    zero = nn.Gradients([np.zeros_like(w) for w in p.weights], [np.zeros_like(b) for b in p.biases], None)
    nn.adam_update(p, zero, st_, 1e-3)
    assert p.digest() == before
    assert st_.step == 1


def test_adam_first_step():
    p = nn.mlp_init([3, 2], 0)
    old = [a.copy() for a in p.arrays()]
    rng = np.random.default_rng(0)
    g = nn.Gradients([rng.standard_normal((3, 2))], [rng.standard_normal(2)], None)
    st_ = nn.adam_init(p.arrays())
    nn.adam_update(p, g, st_, 1e-3)
    for new, o, gr in zip(p.arrays(), old, g.arrays()):
        step = new - o
        # bias-corrected first step is -lr * g / (|g| + eps)
        np.testing.assert_allclose(step, -1e-3 * gr / (np.abs(gr) + 1e-8), rtol=1e-12)
        assert np.all(np.sign(step) == -np.sign(gr))
    assert [m.shape for m in st_.m] == [a.shape for a in p.arrays()]


def test_adam_rejects_nonfinite():
    p = nn.mlp_init([2, 2], 0)
    g = nn.Gradients([np.full((2, 2), np.nan)], [np.zeros(2)], None)
    with pytest.raises(nn.DivergenceError):
        nn.adam_update(p, g, nn.adam_init(p.arrays()), 1e-3)


def test_params_doc_roundtrip(tmp_path):
    p = nn.mlp_init([4, 8, 3], 5)
    nn.save_params(p, tmp_path / "net.json")
    q = nn.load_params(tmp_path / "net.json")
    assert q.digest() == p.digest()
    assert q.layer_sizes == p.layer_sizes


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("weights"),
    lambda d: d["weights"][0].pop(),
    lambda d: d.__setitem__("format_version", 99),
])
def test_params_doc_validation(mutate):
    d = nn.params_to_doc(nn.mlp_init([3, 4, 2], 0))
    mutate(d)
    with pytest.raises(ValueError, match="net"):
        nn.params_from_doc(d, "net")
