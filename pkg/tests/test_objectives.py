import numpy as np
import pytest

from vaebounds import checks, nets, objectives as O, ppca
from vaebounds.distributions import DiagGaussian
from vaebounds.exceptions import ContractError, DimensionError

N_X, N_Z = 6, 2


def make_nets(kind, seed=0, hidden=(8,)):
    out = {}
    for i, role in enumerate(O.NET_ROLES[kind]):
        a, b = (N_X, N_Z) if role.startswith("enc") else (N_Z, N_X)
        out[role] = nets.MlpGaussianNet.create(a, b, hidden, seed=(seed, i))
    return out


@pytest.fixture
def batch(rng):
    return rng.standard_normal((5, N_X))


@pytest.fixture
def model(rng):
    return ppca.PpcaModel.from_loading(rng.standard_normal((N_X, N_Z)), 0.5)


@pytest.mark.parametrize("kind", list(O.ObjectiveKind))
def test_gradients_match_fd(kind):
    errs = checks.gradient_errors(kind, seed=3)
    assert np.mean(errs <= 1e-4) >= 0.95
    assert errs.max() <= 1e-2


def test_vae_a_fixed_decoder_gradients():
    errs = checks.gradient_errors("vae_a", seed=4, decoder="ppca")
    assert np.mean(errs <= 1e-4) >= 0.95 and errs.max() <= 1e-2


@pytest.mark.parametrize("kind", list(O.ObjectiveKind))
def test_decomposition_and_direction(kind, batch, model):
    est = O.evaluate(kind, make_nets(kind), batch, 16, 7, model)
    assert est.recompose() == pytest.approx(est.value, rel=1e-12, abs=1e-12)
    assert est.per_point.shape == (5,)
    assert est.value == pytest.approx(est.per_point.mean())
    assert est.direction == ("upper" if kind in (O.ObjectiveKind.EUBO, O.ObjectiveKind.JSD_EUBO) else "lower")
    assert np.isfinite(est.se) and est.se > 0


def test_deterministic_given_seed(batch):
    n = make_nets(O.ObjectiveKind.ELBO)
    a = O.evaluate("elbo", n, batch, 8, (1, 2))
    b = O.evaluate("elbo", n, batch, 8, (1, 2))
    assert a.value == b.value
    assert a.value != O.evaluate("elbo", n, batch, 8, (1, 3)).value


def test_tied_encoders_reduce_to_elbo(batch):
    enc = nets.MlpGaussianNet.create(N_X, N_Z, (8,), seed=1)
    dec = nets.MlpGaussianNet.create(N_Z, N_X, (8,), seed=2)
    ref = O.elbo(enc, dec, batch, 32, 9)
    assert O.eubo(enc, enc, dec, batch, 32, 9).value == ref.value
    assert O.vae_c(enc, enc, dec, batch, 32, 9).value == ref.value
    assert O.eubo(enc, enc, dec, batch, 32, 9).extra == 0.0


def test_jsd_tied_matches_eubo_tied(batch):
    enc = nets.MlpGaussianNet.create(N_X, N_Z, (8,), seed=1)
    dec = nets.MlpGaussianNet.create(N_Z, N_X, (8,), seed=2)
    j = O.jsd_eubo(enc, enc, dec, dec, batch, 512, 5)
    e = O.eubo(enc, enc, dec, batch, 512, 5)
    assert j.extra == pytest.approx(0.0, abs=1e-12)
    assert abs(j.value - e.value) <= 3 * np.hypot(j.se, e.se)


def test_vae_a_fixed_decoder_is_evidence_minus_dvy(rng, model):
    # with the P-PCA likelihood as decoder, recon - regu + D[V||W] = log p(x)
    kind = O.ObjectiveKind.VAE_A
    n = make_nets(kind, hidden=())
    x = rng.standard_normal((3, N_X))
    est = O.evaluate(kind, n, x, 20000, 1, model, decoder="ppca")
    mv, lv = n["enc_v"].apply(x)
    my, ly = n["enc_y"].apply(x)
    from vaebounds.divergence import kl_diag_terms

    target = np.mean(ppca.evidence_logpdf(model, x) - kl_diag_terms(mv, np.exp(lv), my, np.exp(ly)))
    assert abs(est.value - target) < 4 * est.se


def test_training_loss_matches_tape(batch, model):
    for kind in O.ObjectiveKind:
        n = make_nets(kind)
        loss, grads = O.loss_and_grads(kind, n, batch, 2, 4, model)
        assert loss == pytest.approx(O.training_loss(kind, n, batch, 2, 4, model), rel=1e-13)
        assert set(grads) == set(O.NET_ROLES[kind])


def test_elbo_training_loss_is_negative_value(batch):
    n = make_nets(O.ObjectiveKind.ELBO)
    loss = O.training_loss("elbo", n, batch, 4, 4)
    assert loss == pytest.approx(-O.evaluate("elbo", n, batch, 4, 4).value, rel=1e-13)


def test_contract_errors(batch, model):
    n = make_nets(O.ObjectiveKind.ELBO)
    with pytest.raises(ContractError):
        O.evaluate("eubo", n, batch, 4, 0)
    with pytest.raises(ContractError):
        O.evaluate("vae_a", make_nets(O.ObjectiveKind.VAE_A), batch, 4, 0, model=None)
    with pytest.raises(DimensionError):
        O.evaluate("elbo", n, np.ones((2, N_X + 1)), 4, 0)
    with pytest.raises(ValueError):
        O.evaluate("elbo", n, batch, 0, 0)
    with pytest.raises(ValueError):
        O.evaluate("bogus", n, batch, 1, 0)


@pytest.mark.parametrize("eps", [0.2, 0.05, 0.01])
def test_second_order_gap_closed_form(eps):
    # unit variances, mean shift eps: D = eps^2/2, quadratic term = (exp(eps^2) - 1)/2
    v = DiagGaussian(np.zeros(1), np.ones(1))
    y = DiagGaussian(np.full(1, eps), np.ones(1))
    exact, quad = O.second_order_gap(v, y)
    assert exact == pytest.approx(eps**2 / 2, rel=1e-14)
    assert quad == pytest.approx(np.expm1(eps**2) / 2, rel=1e-10)


def test_second_order_gap_variance_shift():
    # variance ratio r = sy/sv: int Y^2/V = 1/(r sqrt(2/r - 1)), quadratic term = (that - 1)/2
    v = DiagGaussian(np.zeros(2), np.array([1.0, 2.0]))
    y = DiagGaussian(np.zeros(2), np.array([1.1, 2.2]))
    r = 1.1
    c = 1.0 / (r * np.sqrt(2.0 / r - 1.0)) - 1.0
    exact, quad = O.second_order_gap(v, y)
    assert quad == pytest.approx(0.5 * ((1 + c) ** 2 - 1), rel=1e-9)
    assert exact == pytest.approx(np.log(r) + 1 / r - 1, rel=1e-13)
    wide = DiagGaussian(np.zeros(2), np.array([5.0, 5.0]))
    assert O.second_order_gap(v, wide)[1] == np.inf
