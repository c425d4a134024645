"""Gaussian divergences: closed forms, the SVD-reduced KL to the P-PCA posterior,
a Monte Carlo Jensen-Shannon estimator and the trace/log-det positivity residual.

Formulas marked *generic* take arrays or autodiff tensors and sum over the
last axis, so they serve both evaluation and training.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from . import linalg
from .distributions import LOG_2PI, DiagGaussian, FullGaussian
from .exceptions import DimensionError, SingularityError
from .ppca import PpcaModel, make_rng, posterior_w

__all__ = [
    "DiagGaussian",
    "FullGaussian",
    "McEstimate",
    "kl_diag",
    "kl_dense",
    "kl_v_w_svd",
    "vae_a_new_term",
    "jsd_mc",
    "positivity_residual",
]


class McEstimate(NamedTuple):
    value: float
    se: float


def kl_diag_terms(mean_v, var_v, mean_y, var_y):
    """Generic ``D[V||Y]`` between factorised Gaussians, summed over the last axis."""
    return 0.5 * ad.sum(
        ad.log(var_y) - ad.log(var_v) + var_v / var_y - 1.0 + ad.square(mean_y - mean_v) / var_y,
        axis=-1,
    )


def kl_diag_prior_terms(mean_v, var_v, log_var_v=None):
    """Generic ``D[V||N(0, I)]``; pass ``log_var_v`` when it is already available."""
    if log_var_v is None:
        log_var_v = ad.log(var_v)
    return 0.5 * ad.sum(var_v + ad.square(mean_v) - 1.0 - log_var_v, axis=-1)


def kl_diag(v: DiagGaussian, y: DiagGaussian):
    if v.mean.shape != y.mean.shape:
        raise DimensionError(f"dimension mismatch {v.mean.shape} vs {y.mean.shape}")
    out = kl_diag_terms(v.mean, v.variance, y.mean, y.variance)
    return float(out) if np.ndim(out) == 0 else out


def kl_dense(v: FullGaussian, w: FullGaussian) -> float:
    """Closed-form ``D[V||W]`` for full-covariance Gaussians (Cholesky based)."""
    if v.dim != w.dim:
        raise DimensionError(f"dimension mismatch {v.dim} vs {w.dim}")
    lv = v.cholesky()
    lw = w.cholesky()
    logdet_v = 2.0 * np.sum(np.log(np.diag(lv)))
    logdet_w = 2.0 * np.sum(np.log(np.diag(lw)))
    a = np.linalg.solve(lw, lv)
    trace = float(np.sum(a * a))
    d = np.linalg.solve(lw, w.mean - v.mean)
    return 0.5 * (logdet_w - logdet_v + trace - v.dim + float(d @ d))


class SvdKlFactors(NamedTuple):
    """Per-model constants of the SVD route, independent of the encoder."""

    j_diag: np.ndarray  # diagonal of I + lam^T lam
    log1p_lam2: np.ndarray
    h_diag: np.ndarray  # lam^2 / (1 + lam^2)
    mu_bar_scale: np.ndarray  # (1 + lam^2) / lam
    u_over_sigma: np.ndarray  # U / sigma, so x @ it = U^T x_bar
    v_svd: np.ndarray  # right singular vectors (not the encoder V)


def svd_kl_factors(model: PpcaModel) -> SvdKlFactors:
    lam = model.lam
    if lam.size == 0 or lam[-1] <= 0.0 or lam[-1] <= max(model.n_x, model.n_z) * np.finfo(float).eps * lam[0]:
        raise SingularityError("lam = c_r/sigma is rank deficient; its transpose has no right inverse")
    lam2 = lam**2
    vm = model.svd.v
    return SvdKlFactors(
        j_diag=(vm * vm) @ (1.0 + lam2),
        log1p_lam2=np.log1p(lam2),
        h_diag=lam2 / (1.0 + lam2),
        mu_bar_scale=(1.0 + lam2) / lam,
        u_over_sigma=model.svd.u / model.sigma,
        v_svd=vm,
    )


def kl_v_w_svd_terms(mean_v, var_v, x, f: SvdKlFactors, log_var_v=None):
    """Generic ``D[V||W]`` through the thin SVD of ``c_r / sigma``.

    The trace/log-det part uses the diagonal of ``I + lam^T lam`` and
    ``log(1 + lam_l^2)``; the quadratic part projects ``x_bar - mu_bar`` on the
    left singular vectors, with ``U^T mu_bar = diag((1+lam^2)/lam) V^T mu``,
    and weights by ``lam^2/(1+lam^2)``. No n_x x n_x matrix is formed.
    """
    if log_var_v is None:
        log_var_v = ad.log(var_v)
    d1 = ad.sum(var_v * f.j_diag - 1.0 - f.log1p_lam2 - log_var_v, axis=-1)
    x_proj = np.asarray(x) @ f.u_over_sigma
    mu_proj = (mean_v @ f.v_svd) * f.mu_bar_scale
    diff = x_proj - mu_proj
    d2 = ad.sum(ad.square(diff) * f.h_diag, axis=-1)
    return 0.5 * (d1 + d2)


def kl_v_w_svd(v: DiagGaussian, model: PpcaModel, x):
    if v.dim != model.n_z:
        raise DimensionError(f"encoder dimension {v.dim} != n_z {model.n_z}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.n_x:
        raise DimensionError(f"x dimension {x.shape[-1]} != n_x {model.n_x}")
    out = kl_v_w_svd_terms(v.mean, v.variance, x, svd_kl_factors(model))
    return float(out) if np.ndim(out) == 0 else out


def kl_v_w_dense(v: DiagGaussian, model: PpcaModel, x) -> float:
    """Reference ``D[V||W]`` through the dense closed form; single point only."""
    return kl_dense(v.as_full(), posterior_w(model, x))


def vae_a_new_term(v: DiagGaussian, y: DiagGaussian, model: PpcaModel, x):
    """``E_V[log Y - log W] = D[V||W] - D[V||Y]``."""
    return kl_v_w_svd(v, model, x) - kl_diag(v, y)


def _diag_logpdf(z, mean, var):
    return -0.5 * np.sum(LOG_2PI + np.log(var) + (z - mean) ** 2 / var, axis=-1)


def jsd_mc(u: DiagGaussian, v: DiagGaussian, n_samples: int, seed) -> McEstimate:
    """Monte Carlo Jensen-Shannon divergence ``1/2 D[U||M] + 1/2 D[V||M]``.

    Each draw samples both components from one common ``eps`` (antithetic
    pairs ``mean +- sd*eps``) and evaluates the exact mixture log-density;
    the common draw makes the estimate exactly symmetric in ``u`` and ``v``.
    """
    if n_samples < 100:
        raise ValueError("jsd_mc needs n_samples >= 100")
    if u.mean.shape != v.mean.shape or u.mean.ndim != 1:
        raise DimensionError("jsd_mc takes two unbatched Gaussians of equal dimension")
    rng = make_rng(seed)
    half = n_samples // 2
    eps = rng.standard_normal((half, u.dim))

    def softplus_term(comp, other, eps):
        # log comp - log M = log 2 - log(1 + other/comp); keep only the second part
        z = comp.mean + np.sqrt(comp.variance) * eps
        lc = _diag_logpdf(z, comp.mean, comp.variance)
        lo = _diag_logpdf(z, other.mean, other.variance)
        return np.logaddexp(0.0, lo - lc)

    f_plus = softplus_term(u, v, eps) + softplus_term(v, u, eps)
    f_minus = softplus_term(u, v, -eps) + softplus_term(v, u, -eps)
    g = 0.25 * (f_plus + f_minus)
    # shifted mean: exact when g is constant, so J(u, u) = 0 and the separated limit is log 2
    dev = g - g[0]
    return McEstimate(float(np.log(2.0) - (g[0] + np.mean(dev))), float(np.std(dev, ddof=1) / np.sqrt(half)))


def positivity_residual(sigma_i, sigma_j) -> float:
    """``Tr(S_J^-1 S_I) - log|S_J^-1 S_I| - n`` from the eigenvalues of ``S_I^1/2 S_J^-1 S_I^1/2``."""
    sigma_i = linalg.as_matrix(sigma_i, "sigma_i")
    sigma_j = linalg.as_matrix(sigma_j, "sigma_j")
    if sigma_i.shape != sigma_j.shape or sigma_i.shape[0] != sigma_i.shape[1]:
        raise DimensionError(f"incompatible shapes {sigma_i.shape}, {sigma_j.shape}")
    root_i = linalg.spd_power(sigma_i, 0.5, "sigma_i")
    inv_j = linalg.spd_power(sigma_j, -1.0, "sigma_j")
    d = root_i @ inv_j @ root_i
    lam = linalg.sym_eig(0.5 * (d + d.T)).eigenvalues
    if lam.size and lam[-1] <= 0.0:
        raise SingularityError("similar matrix lost positive definiteness numerically")
    dl = lam - 1.0
    return float(np.sum(dl - np.log1p(dl)))
