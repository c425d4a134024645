import numpy as np
import pytest
from hypothesis import given, strategies as st

from vaebounds import divergence as D
from vaebounds import ppca
from vaebounds.exceptions import DimensionError, FactorizationError, SingularityError

C_R = np.array([[1.0, 0.5], [0.2, -1.0], [0.3, 0.4]])
X = np.array([0.3, -0.7, 1.1])
V = D.DiagGaussian(np.array([0.1, -0.2]), np.array([0.3, 0.8]))
# 50-digit mpmath value of the dense closed form for (V, C_R, sigma=0.5, X)
KL_VW = 4.4466514111334226665
# quadrature value of JSD(N(0,1), N(1,2)), variance 2
JSD_1D = 0.097072076400591955285


def random_case(rng, n_x, n_z):
    model = ppca.PpcaModel.from_loading(rng.standard_normal((n_x, n_z)), rng.uniform(0.05, 2.0))
    v = D.DiagGaussian(rng.standard_normal(n_z), np.exp(rng.uniform(-2, 1, n_z)))
    return model, v, rng.standard_normal(n_x)


def test_kl_v_w_frozen(backend):
    model = ppca.PpcaModel.from_loading(C_R, 0.5)
    assert D.kl_v_w_svd(V, model, X) == pytest.approx(KL_VW, rel=1e-13)
    assert D.kl_v_w_dense(V, model, X) == pytest.approx(KL_VW, rel=1e-13)


def test_kl_v_w_svd_batched(rng):
    model, _, _ = random_case(rng, 8, 3)
    means = rng.standard_normal((4, 3))
    vars_ = np.exp(rng.standard_normal((4, 3)))
    xs = rng.standard_normal((4, 8))
    batch = D.kl_v_w_svd(D.DiagGaussian(means, vars_), model, xs)
    single = [D.kl_v_w_dense(D.DiagGaussian(m, s), model, x) for m, s, x in zip(means, vars_, xs)]
    np.testing.assert_allclose(batch, single, rtol=1e-10)


def test_kl_v_w_svd_errors(rng):
    model, v, x = random_case(rng, 5, 2)
    with pytest.raises(DimensionError):
        D.kl_v_w_svd(D.DiagGaussian(np.zeros(3), np.ones(3)), model, x)
    with pytest.raises(DimensionError):
        D.kl_v_w_svd(v, model, np.zeros(4))
    rank1 = ppca.PpcaModel.from_loading(np.outer(np.arange(1.0, 6.0), [1.0, 1.0]), 0.5)
    with pytest.raises(SingularityError):
        D.kl_v_w_svd(v, rank1, x)


def test_kl_diag_against_dense(rng):
    for n in (1, 3, 6):
        a = D.DiagGaussian(rng.standard_normal(n), np.exp(rng.standard_normal(n)))
        b = D.DiagGaussian(rng.standard_normal(n), np.exp(rng.standard_normal(n)))
        assert D.kl_diag(a, b) == pytest.approx(D.kl_dense(a.as_full(), b.as_full()), rel=1e-12)


def test_kl_diag_known():
    # D[N(0,1) || N(1,4)] = 0.5 (log 4 + 1/4 - 1 + 1/4)
    a = D.DiagGaussian(np.zeros(1), np.ones(1))
    b = D.DiagGaussian(np.ones(1), np.full(1, 4.0))
    assert D.kl_diag(a, b) == pytest.approx(0.5 * (np.log(4.0) - 0.5), rel=1e-15)
    with pytest.raises(DimensionError):
        D.kl_diag(a, D.DiagGaussian(np.zeros(2), np.ones(2)))


@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_kl_nonnegative_and_zero_at_equality(n, seed):
    rng = np.random.default_rng(seed)
    a = D.DiagGaussian(rng.standard_normal(n), np.exp(rng.uniform(-3, 3, n)))
    b = D.DiagGaussian(rng.standard_normal(n), np.exp(rng.uniform(-3, 3, n)))
    assert D.kl_diag(a, b) >= -1e-12
    assert abs(D.kl_diag(a, a)) < 1e-12


@given(st.sampled_from([4, 8, 16]), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_svd_route_matches_dense_property(n_x, n_z, seed):
    model, v, x = random_case(np.random.default_rng(seed), n_x, n_z)
    fast, dense = D.kl_v_w_svd(v, model, x), D.kl_v_w_dense(v, model, x)
    assert fast >= -1e-10
    assert fast == pytest.approx(dense, rel=1e-8, abs=1e-12)


def test_kl_dense_rejects_non_spd():
    bad = D.FullGaussian(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(FactorizationError):
        D.kl_dense(bad, bad)


def test_vae_a_new_term_identity(rng):
    model, v, x = random_case(rng, 6, 2)
    w = ppca.posterior_w(model, x)
    # E_V[log Y - log W] by Monte Carlo with common samples
    y = D.DiagGaussian(v.mean + 0.3, v.variance * 1.5)
    z = v.mean + np.sqrt(v.variance) * rng.standard_normal((200000, 2))
    diff = y.logpdf(z) - w.logpdf(z)
    se = diff.std() / np.sqrt(diff.size)
    assert abs(D.vae_a_new_term(v, y, model, x) - diff.mean()) < 4 * se
    # Y = V leaves D[V||W]; Y = W (when W is diagonal) would cancel it
    assert D.vae_a_new_term(v, v, model, x) == pytest.approx(D.kl_v_w_svd(v, model, x))


def test_jsd_frozen_and_bounds():
    u = D.DiagGaussian(np.zeros(1), np.ones(1))
    v = D.DiagGaussian(np.ones(1), np.full(1, 2.0))
    est = D.jsd_mc(u, v, 200000, 0)
    assert abs(est.value - JSD_1D) < 4 * est.se
    same = D.jsd_mc(u, u, 1000, 1)
    assert same.value == 0.0 and same.se == 0.0
    far = D.jsd_mc(u, D.DiagGaussian(np.full(1, 100.0), np.ones(1)), 1000, 2)
    assert far.value == pytest.approx(np.log(2.0), abs=1e-12)
    with pytest.raises(ValueError):
        D.jsd_mc(u, v, 50, 0)


def test_positivity_residual():
    assert D.positivity_residual(np.eye(3), np.eye(3)) == pytest.approx(0.0, abs=1e-15)
    assert D.positivity_residual([[2.0]], [[1.0]]) == pytest.approx(1.0 - np.log(2.0), rel=1e-14)
    with pytest.raises(DimensionError):
        D.positivity_residual(np.eye(2), np.eye(3))
    with pytest.raises(FactorizationError):
        D.positivity_residual(np.eye(2), -np.eye(2))


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_positivity_property(n, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((2, n, n))
    si, sj = a @ a.T + 0.1 * np.eye(n), b @ b.T + 0.1 * np.eye(n)
    r = D.positivity_residual(si, sj)
    assert r >= -1e-10
    # equals trace - logdet - n of S_J^-1 S_I
    m = np.linalg.solve(sj, si)
    assert r == pytest.approx(np.trace(m) - np.linalg.slogdet(m)[1] - n, rel=1e-7, abs=1e-9)
