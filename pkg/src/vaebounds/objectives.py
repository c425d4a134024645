"""Evidence bounds assembled from encoder/decoder networks.

Every objective is built by :func:`_terms`, which returns per-sample
reconstruction and per-point (or per-sample) regulariser and extra-divergence
terms. The same code runs on plain arrays for evaluation and on tape tensors
for training, so evaluation and gradients cannot drift apart.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import autodiff as ad
from .distributions import LOG_2PI, DiagGaussian
from .divergence import kl_diag, kl_diag_prior_terms, kl_diag_terms, kl_v_w_svd_terms, svd_kl_factors
from .exceptions import ContractError, DimensionError
from .nets import MlpGaussianNet
from .ppca import PpcaModel, make_rng

LOG2 = float(np.log(2.0))


class ObjectiveKind(str, enum.Enum):
    ELBO = "elbo"
    VAE_A = "vae_a"
    EUBO = "eubo"
    VAE_C = "vae_c"
    JSD_EUBO = "jsd_eubo"


NET_ROLES = {
    ObjectiveKind.ELBO: ("enc_v", "dec"),
    ObjectiveKind.VAE_A: ("enc_v", "enc_y", "dec"),
    ObjectiveKind.EUBO: ("enc_v", "enc_u", "dec"),
    ObjectiveKind.VAE_C: ("enc_v", "enc_u", "dec"),
    ObjectiveKind.JSD_EUBO: ("enc_v", "enc_u", "dec_v", "dec_u"),
}

DIRECTION = {
    ObjectiveKind.ELBO: "lower",
    ObjectiveKind.VAE_A: "lower",
    ObjectiveKind.EUBO: "upper",
    ObjectiveKind.VAE_C: "lower",
    ObjectiveKind.JSD_EUBO: "upper",
}

# value = recon - regu + EXTRA_SIGN * extra
EXTRA_SIGN = {
    ObjectiveKind.ELBO: 0.0,
    ObjectiveKind.VAE_A: 1.0,
    ObjectiveKind.EUBO: 1.0,
    ObjectiveKind.VAE_C: 0.0,
    ObjectiveKind.JSD_EUBO: 0.0,
}


@dataclass
class BoundEstimate:
    """Batch-averaged bound with its decomposition.

    ``extra`` is the variant's additional divergence: the VAE_A new term,
    ``D[V||U]`` for EUBO and VAE_C, and the Jensen-Shannon ``J[V||U]`` for
    JSD_EUBO. ``se`` is the Monte Carlo standard error of ``value`` from the
    latent sampling alone; ``per_point`` holds the per-datapoint values.
    """

    kind: ObjectiveKind
    value: float
    recon: float
    regu: float
    extra: float
    mc_samples: int
    direction: str
    se: float
    per_point: np.ndarray = field(repr=False)

    def recompose(self) -> float:
        return self.recon - self.regu + EXTRA_SIGN[self.kind] * self.extra


def _gauss_logpdf(x, mean, log_var):
    return -0.5 * ad.sum(LOG_2PI + log_var + ad.square(x - mean) / ad.exp(log_var), axis=-1)


def _std_normal_logpdf(z):
    return -0.5 * ad.sum(LOG_2PI + ad.square(z), axis=-1)


def _terms(kind, nets, params, x, eps, model, decoder):
    """``(recon, regu, extra, penalty)``; recon is (S, B), the rest (B,) or (S, B).

    ``penalty`` is what the training loss adds to ``-(recon - regu)``; see
    :func:`training_loss_terms`.
    """

    def apply(role, inp):
        return nets[role].apply(inp, params[role] if params is not None else None)

    mv, lv = apply("enc_v", x)
    var_v = ad.exp(lv)
    zv = mv + ad.exp(0.5 * lv) * eps[0]

    if kind is ObjectiveKind.JSD_EUBO:
        mu, lu = apply("enc_u", x)
        zu = mu + ad.exp(0.5 * lu) * eps[1]
        dmv, dlv = apply("dec_v", zv)
        dmu, dlu = apply("dec_u", zu)
        recon = 0.5 * (_gauss_logpdf(x, dmv, dlv) + _gauss_logpdf(x, dmu, dlu))
        lvv, luv = _gauss_logpdf(zv, mv, lv), _gauss_logpdf(zv, mu, lu)
        lvu, luu = _gauss_logpdf(zu, mv, lv), _gauss_logpdf(zu, mu, lu)
        lm_v = ad.logaddexp(lvv, luv) - LOG2
        lm_u = ad.logaddexp(lvu, luu) - LOG2
        regu = 0.5 * ((lm_v - _std_normal_logpdf(zv)) + (lm_u - _std_normal_logpdf(zu)))
        extra = 0.5 * ((lvv - lm_v) + (luu - lm_u))
        return recon, regu, extra, 2.0 * extra

    if kind is ObjectiveKind.VAE_A and decoder == "ppca":
        recon = _gauss_logpdf(x, zv @ model.c_r.T, np.full(model.n_x, 2.0 * np.log(model.sigma)))
    else:
        dm, dl = apply("dec", zv)
        recon = _gauss_logpdf(x, dm, dl)
    regu = kl_diag_prior_terms(mv, var_v, lv)

    if kind is ObjectiveKind.ELBO:
        extra = 0.0 * regu
        return recon, regu, extra, extra
    if kind is ObjectiveKind.VAE_A:
        my, ly = apply("enc_y", x)
        kl_vw = kl_v_w_svd_terms(mv, var_v, x, svd_kl_factors(model), lv)
        kl_vy = kl_diag_terms(mv, var_v, my, ad.exp(ly))
        extra = kl_vw - kl_vy
        return recon, regu, extra, (-extra if decoder == "ppca" else kl_vy)
    mu, lu = apply("enc_u", x)
    extra = kl_diag_terms(mv, var_v, mu, ad.exp(lu))
    return recon, regu, extra, extra


def training_loss_terms(recon, regu, penalty):
    """Per-point training loss ``-(recon - regu) + penalty`` (to be minimised).

    The ELBO is maximised as written. The other objectives differ from their
    reported values where maximising the value is ill-posed:

    * VAE_A with a learned decoder: ``D[V||W]`` would reward moving V away
      from the fixed encoder without bound, so only ``D[V||Y]`` is minimised.
      With the fixed P-PCA decoder ``recon - regu + D[V||W]`` is the exact
      log-evidence and the value is maximised as written.
    * EUBO and VAE_C: the networks are fitted through ``recon - regu`` while
      the encoder-pair divergence itself is minimised, so the bracket closes
      from above instead of collapsing through the decoder.
    * JSD_EUBO: likewise, with the Jensen-Shannon term entering twice.
    """
    return -(recon - regu) + penalty


def _check(kind, nets, x, mc_samples, model):
    missing = [r for r in NET_ROLES[kind] if r not in nets]
    if missing:
        raise ContractError(f"{kind.value} needs networks {missing}")
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    enc = nets["enc_v"]
    if x.shape[-1] != enc.in_dim:
        raise DimensionError(f"batch has {x.shape[-1]} features, encoder expects {enc.in_dim}")
    for role in NET_ROLES[kind]:
        net = nets[role]
        if role.startswith("enc") and (net.in_dim != x.shape[-1] or net.out_dim != enc.out_dim):
            raise DimensionError(f"{role} shape {net.widths} incompatible")
        if role.startswith("dec") and (net.in_dim != enc.out_dim or net.out_dim != x.shape[-1]):
            raise DimensionError(f"{role} shape {net.widths} incompatible")
    if kind is ObjectiveKind.VAE_A:
        if model is None:
            raise ContractError("vae_a needs a P-PCA model")
        if model.n_z != enc.out_dim or model.n_x != x.shape[-1]:
            raise DimensionError("P-PCA model dimensions do not match the networks")
    return x


def draw_eps(kind, mc_samples, batch_size, n_z, seed) -> np.ndarray:
    n_comp = 2 if kind is ObjectiveKind.JSD_EUBO else 1
    return make_rng(seed).standard_normal((n_comp, mc_samples, batch_size, n_z))


def evaluate(kind, nets, batch, mc_samples, seed, model=None, decoder="learned") -> BoundEstimate:
    kind = ObjectiveKind(kind)
    x = _check(kind, nets, batch, mc_samples, model)
    eps = draw_eps(kind, mc_samples, x.shape[0], nets["enc_v"].out_dim, seed)
    recon, regu, extra, _ = _terms(kind, nets, None, x, eps, model, decoder)
    shape = (mc_samples, x.shape[0])
    recon, regu, extra = (np.broadcast_to(t, shape) for t in (recon, regu, extra))
    per_sample = recon - regu + EXTRA_SIGN[kind] * extra
    per_point = per_sample.mean(axis=0)
    if mc_samples > 1:
        se = float(np.sqrt(np.sum(per_sample.var(axis=0, ddof=1)) / mc_samples) / x.shape[0])
    else:
        se = float("nan")
    return BoundEstimate(
        kind=kind,
        value=float(per_point.mean()),
        recon=float(recon.mean()),
        regu=float(regu.mean()),
        extra=float(extra.mean()),
        mc_samples=mc_samples,
        direction=DIRECTION[kind],
        se=se,
        per_point=per_point,
    )


def loss_and_grads(kind, nets, batch, mc_samples, seed, model=None, decoder="learned"):
    """Mean training loss over the batch and its gradients.

    Gradients come back as ``{role: [dW0, db0, dW1, ...]}``.
    """
    kind = ObjectiveKind(kind)
    x = _check(kind, nets, batch, mc_samples, model)
    eps = draw_eps(kind, mc_samples, x.shape[0], nets["enc_v"].out_dim, seed)
    tape = ad.GradientTape()
    params = {role: [tape.watch(p) for p in nets[role].params()] for role in NET_ROLES[kind]}
    recon, regu, _, penalty = _terms(kind, nets, params, x, eps, model, decoder)
    per = training_loss_terms(recon, regu, penalty)
    loss = ad.mean(per)
    flat = ad.backward(tape, loss)
    grads, i = {}, 0
    for role in NET_ROLES[kind]:
        n = len(params[role])
        grads[role] = flat[i:i + n]
        i += n
    return float(ad.value(loss)), grads


def training_loss(kind, nets, batch, mc_samples, seed, model=None, decoder="learned") -> float:
    """The scalar :func:`loss_and_grads` differentiates, evaluated without a tape."""
    kind = ObjectiveKind(kind)
    x = _check(kind, nets, batch, mc_samples, model)
    eps = draw_eps(kind, mc_samples, x.shape[0], nets["enc_v"].out_dim, seed)
    recon, regu, _, penalty = _terms(kind, nets, None, x, eps, model, decoder)
    return float(np.mean(training_loss_terms(recon, regu, penalty)))


def elbo(enc_v: MlpGaussianNet, dec: MlpGaussianNet, batch, mc_samples: int, seed) -> BoundEstimate:
    return evaluate(ObjectiveKind.ELBO, {"enc_v": enc_v, "dec": dec}, batch, mc_samples, seed)


def vae_a(enc_v, enc_y, dec, model: PpcaModel, batch, mc_samples: int, seed, decoder="learned") -> BoundEstimate:
    nets = {"enc_v": enc_v, "enc_y": enc_y, "dec": dec}
    return evaluate(ObjectiveKind.VAE_A, nets, batch, mc_samples, seed, model=model, decoder=decoder)


def eubo(enc_v, enc_u, dec, batch, mc_samples: int, seed) -> BoundEstimate:
    return evaluate(ObjectiveKind.EUBO, {"enc_v": enc_v, "enc_u": enc_u, "dec": dec}, batch, mc_samples, seed)


def vae_c(enc_v, enc_u, dec, batch, mc_samples: int, seed) -> BoundEstimate:
    return evaluate(ObjectiveKind.VAE_C, {"enc_v": enc_v, "enc_u": enc_u, "dec": dec}, batch, mc_samples, seed)


def jsd_eubo(enc_v, enc_u, dec_v, dec_u, batch, mc_samples: int, seed) -> BoundEstimate:
    nets = {"enc_v": enc_v, "enc_u": enc_u, "dec_v": dec_v, "dec_u": dec_u}
    return evaluate(ObjectiveKind.JSD_EUBO, nets, batch, mc_samples, seed)


def _chi2_coordinate(mv, sv, my, sy) -> float:
    """``int (Y - V)^2 / V dz`` for 1-D Gaussians by adaptive quadrature."""
    if 2.0 / sy - 1.0 / sv <= 0.0:
        return float("inf")
    s_star = 1.0 / (2.0 / sy - 1.0 / sv)
    m_star = s_star * (2.0 * my / sy - mv / sv)
    width = 40.0 * np.sqrt(max(s_star, sv, sy))
    lo = min(m_star, mv, my) - width
    hi = max(m_star, mv, my) + width

    def integrand(z):
        lv = -0.5 * (LOG_2PI + np.log(sv) + (z - mv) ** 2 / sv)
        ly = -0.5 * (LOG_2PI + np.log(sy) + (z - my) ** 2 / sy)
        return np.exp(lv) * np.expm1(ly - lv) ** 2

    val, _ = integrate.quad(integrand, lo, hi, points=sorted({mv, my, m_star}), epsabs=0.0, epsrel=1e-13, limit=500)
    return float(val)


def second_order_gap(v: DiagGaussian, y: DiagGaussian) -> tuple[float, float]:
    """``(D[V||Y], 1/2 int dY^2 / V)`` for unbatched factorised Gaussians.

    ``int Y^2/V`` factorises over coordinates, so the quadratic term is
    ``1/2 (prod_k (1 + c_k) - 1)`` with ``c_k`` the per-coordinate quadrature.
    """
    if v.mean.shape != y.mean.shape or v.mean.ndim != 1:
        raise DimensionError("second_order_gap takes two unbatched Gaussians of equal dimension")
    exact = kl_diag(v, y)
    c = np.array([_chi2_coordinate(*a) for a in zip(v.mean, v.variance, y.mean, y.variance)])
    if not np.all(np.isfinite(c)):
        return exact, float("inf")
    return exact, 0.5 * float(np.expm1(np.sum(np.log1p(c))))
