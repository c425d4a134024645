"""Gaussian law containers shared by the P-PCA model, divergences and networks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, FactorizationError

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class DiagGaussian:
    """Factorised Gaussian. ``mean``/``variance`` are (n,) or batched (B, n)."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        var = np.asarray(self.variance, dtype=np.float64)
        if mean.shape != var.shape:
            raise DimensionError(f"mean shape {mean.shape} != variance shape {var.shape}")
        if not np.all(var > 0):
            raise ValueError("DiagGaussian variances must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]

    def logpdf(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=np.float64)
        r = x - self.mean
        return -0.5 * np.sum(LOG_2PI + np.log(self.variance) + r * r / self.variance, axis=-1)

    def as_full(self) -> "FullGaussian":
        if self.mean.ndim != 1:
            raise DimensionError("as_full needs an unbatched DiagGaussian")
        return FullGaussian(self.mean, np.diag(self.variance))


@dataclass(frozen=True)
class FullGaussian:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (mean.shape[0], mean.shape[0]):
            raise DimensionError(f"mean {mean.shape} incompatible with covariance {cov.shape}")
        scale = max(1.0, float(np.max(np.abs(cov)))) if cov.size else 1.0
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12 * scale:
            raise FactorizationError("covariance is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def cholesky(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.covariance)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError("covariance is not positive definite") from exc

    def logpdf(self, x) -> np.ndarray | float:
        chol = self.cholesky()
        r = np.atleast_2d(np.asarray(x, dtype=np.float64) - self.mean)
        sol = np.linalg.solve(chol, r.T)
        out = -0.5 * (self.dim * LOG_2PI + 2.0 * np.sum(np.log(np.diag(chol))) + np.sum(sol * sol, axis=0))
        return out if np.ndim(x) > 1 else float(out[0])
