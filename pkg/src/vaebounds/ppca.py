"""Probabilistic PCA in the Roweis parameterisation.

Model: ``x = c_r @ z + v`` with ``z ~ N(0, I)`` and ``v ~ N(0, sigma^2 I)``.
Everything that would need an n_x x n_x inverse goes through the thin SVD of
``lam = c_r / sigma`` instead.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .distributions import LOG_2PI, DiagGaussian, FullGaussian
from .exceptions import DimensionError, InsufficientDataError, SingularityError


def make_rng(seed) -> np.random.Generator:
    """Counter-based (Philox) generator; ``seed`` may be an int or a tuple of ints."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    centered: bool = False

    def __post_init__(self):
        pts = linalg.as_matrix(self.points, "dataset")
        object.__setattr__(self, "points", pts)
        if self.centered and pts.shape[0] and np.max(np.abs(pts.mean(axis=0))) > 1e-10:
            raise ValueError("dataset flagged centered but column means are nonzero")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def n_x(self) -> int:
        return self.points.shape[1]

    def center(self) -> "Dataset":
        if self.centered:
            return self
        return Dataset(self.points - self.points.mean(axis=0), centered=True)


@dataclass(frozen=True)
class PpcaModel:
    c_r: np.ndarray
    sigma: float
    svd: linalg.ThinSvd = field(repr=False)

    @classmethod
    def from_loading(cls, c_r, sigma: float) -> "PpcaModel":
        c_r = linalg.as_matrix(c_r, "c_r")
        sigma = float(sigma)
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        if c_r.shape[1] > c_r.shape[0]:
            raise DimensionError("n_z must not exceed n_x")
        return cls(c_r, sigma, linalg.thin_svd(c_r / sigma))

    @property
    def n_x(self) -> int:
        return self.c_r.shape[0]

    @property
    def n_z(self) -> int:
        return self.c_r.shape[1]

    @property
    def lam(self) -> np.ndarray:
        """Singular values of ``c_r / sigma``, descending."""
        return self.svd.singular_values

    def covariance(self) -> np.ndarray:
        """Dense model covariance ``c_r c_r^T + sigma^2 I`` (for reference use only)."""
        return self.c_r @ self.c_r.T + self.sigma**2 * np.eye(self.n_x)


def data_covariance(data: Dataset) -> np.ndarray:
    if data.n < 2:
        raise InsufficientDataError(f"need at least 2 points, got {data.n}")
    x = data.center().points
    return x.T @ x / data.n


def fit_ppca(data: Dataset, n_z: int, sigma="auto", raw_eigenvectors: bool = False) -> PpcaModel:
    """Fit c_r from the top ``n_z`` eigenvectors of the data covariance.

    Column k is scaled by ``sqrt(max(mu_k - sigma^2, 0))`` unless
    ``raw_eigenvectors`` is set, in which case the unit eigenvectors are used.
    ``sigma="auto"`` takes sigma^2 as the mean of the discarded eigenvalues.
    """
    if not 1 <= n_z <= data.n_x:
        raise DimensionError(f"n_z={n_z} outside [1, {data.n_x}]")
    eig = linalg.sym_eig(data_covariance(data))
    mu = eig.eigenvalues
    if isinstance(sigma, str):
        if sigma != "auto":
            raise ValueError(f"sigma must be positive or 'auto', got {sigma!r}")
        if n_z == data.n_x:
            raise ValueError("sigma='auto' needs at least one discarded eigenvalue")
        sigma = float(np.sqrt(max(np.mean(mu[n_z:]), 0.0)))
        if sigma == 0.0:
            raise ValueError("discarded eigenvalues are zero; supply sigma explicitly")
    sigma = float(sigma)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    m = eig.eigenvectors[:, :n_z]
    if raw_eigenvectors:
        c_r = m.copy()
    else:
        c_r = m * np.sqrt(np.maximum(mu[:n_z] - sigma**2, 0.0))
    return PpcaModel.from_loading(c_r, sigma)


def _check_x(model: PpcaModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.n_x or x.ndim > 2:
        raise DimensionError(f"x has shape {x.shape}, expected (..., {model.n_x})")
    if not np.all(np.isfinite(x)):
        raise ValueError("x contains NaN or Inf")
    return x


def posterior_mean(model: PpcaModel, x) -> np.ndarray:
    """``beta x`` for one point or a batch, via ``beta = V diag(l/(1+l^2)) U^T / sigma``."""
    x = _check_x(model, x)
    lam = model.lam
    proj = (x @ model.svd.u) * (lam / (1.0 + lam**2)) / model.sigma
    return proj @ model.svd.v.T


def posterior_covariance(model: PpcaModel) -> np.ndarray:
    """``I - beta c_r = (I + lam^T lam)^-1 = V diag(1/(1+l^2)) V^T``."""
    v = model.svd.v
    return (v / (1.0 + model.lam**2)) @ v.T


def posterior_w(model: PpcaModel, x) -> FullGaussian:
    x = _check_x(model, x)
    if x.ndim != 1:
        raise DimensionError("posterior_w takes a single point")
    return FullGaussian(posterior_mean(model, x), posterior_covariance(model))


def likelihood(model: PpcaModel, z) -> DiagGaussian:
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != model.n_z:
        raise DimensionError(f"z has shape {z.shape}, expected (..., {model.n_z})")
    mean = z @ model.c_r.T
    return DiagGaussian(mean, np.full_like(mean, model.sigma**2))


def evidence_logpdf(model: PpcaModel, x) -> np.ndarray | float:
    """Exact ``log N(x; 0, c_r c_r^T + sigma^2 I)`` through the SVD of ``c_r / sigma``."""
    x = _check_x(model, x)
    lam2 = model.lam**2
    s2 = model.sigma**2
    logdet = model.n_x * np.log(s2) + np.sum(np.log1p(lam2))
    proj = x @ model.svd.u
    quad = (np.sum(x * x, axis=-1) - np.sum(proj**2 * (lam2 / (1.0 + lam2)), axis=-1)) / s2
    out = -0.5 * (model.n_x * LOG_2PI + logdet + quad)
    return float(out) if x.ndim == 1 else out


def noiseless_posterior(model: PpcaModel, x) -> np.ndarray:
    """``(c_r^T c_r)^-1 c_r^T x``, the zero-noise posterior location."""
    x = _check_x(model, x)
    lam = model.lam
    if lam.size == 0 or lam[-1] <= max(model.n_x, model.n_z) * np.finfo(float).eps * lam[0]:
        raise SingularityError("c_r is rank deficient; c_r^T c_r has no inverse")
    return ((x @ model.svd.u) / (lam * model.sigma)) @ model.svd.v.T


def sample(model: PpcaModel, n: int, seed) -> Dataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(seed)
    z = rng.standard_normal((n, model.n_z))
    noise = rng.standard_normal((n, model.n_x))
    return Dataset(z @ model.c_r.T + model.sigma * noise, centered=False)
