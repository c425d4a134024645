"""Dense symmetric eigendecomposition, thin SVD and the latent-space Woodbury inverse.

The rotation sweeps run in a compiled kernel when ``vaebounds._jacobi`` is
importable and fall back to ``vaebounds._jacobi_py`` otherwise. Setting
``VAEBOUNDS_PURE_PYTHON=1`` forces the fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _jacobi_py
from .exceptions import DimensionError, FactorizationError, NonFiniteError, SymmetryError

_EPS = np.finfo(np.float64).eps

try:
    if os.environ.get("VAEBOUNDS_PURE_PYTHON") == "1":
        raise ImportError("pure-python backend requested")
    from . import _jacobi as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"python": _jacobi_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled
_kernels = _BACKENDS.get("cython", _jacobi_py)


def backend() -> str:
    """Name of the active rotation kernel: ``"cython"`` or ``"python"``."""
    return "cython" if _kernels is _compiled and _compiled is not None else "python"


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def set_backend(name: str) -> None:
    global _kernels
    try:
        _kernels = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available_backends()}") from None


@dataclass(frozen=True)
class ThinSvd:
    """``a = u @ diag(singular_values) @ v.T`` with ``u`` (m x n), ``v`` (n x n)."""

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.singular_values) @ self.v.T


@dataclass(frozen=True)
class SymEig:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate ``a`` as a finite 2-D float array and return it as such."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return m


def as_vector(x, n: int | None = None, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise DimensionError(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return v


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made positive
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def sym_eig(c, sym_tol: float = 1e-12) -> SymEig:
    """Full eigendecomposition of a symmetric matrix, eigenvalues descending."""
    c = as_matrix(c)
    n, k = c.shape
    if n != k:
        raise DimensionError(f"sym_eig needs a square matrix, got {c.shape}")
    scale = max(1.0, float(np.max(np.abs(c)))) if c.size else 1.0
    if np.max(np.abs(c - c.T), initial=0.0) > sym_tol * scale:
        raise SymmetryError("sym_eig input is not symmetric")
    c = np.ascontiguousarray(0.5 * (c + c.T))
    w, vecs, _ = _kernels.jacobi_eigh(c, max(n, 1) * _EPS)
    order = np.argsort(-w, kind="stable")
    w = np.asarray(w)[order]
    vecs = np.asarray(vecs)[:, order]
    vecs = vecs * _fix_signs(vecs)
    return SymEig(w, vecs)


def _complete_basis(u: np.ndarray, good: np.ndarray) -> np.ndarray:
    """Replace columns not flagged ``good`` by an orthonormal completion."""
    m = u.shape[0]
    basis = [u[:, j] for j in np.flatnonzero(good)]
    out = u.copy()
    candidates = iter(np.eye(m))
    for j in np.flatnonzero(~good):
        while True:
            e = next(candidates).copy()
            for b in basis:
                e -= (b @ e) * b
            for b in basis:  # second Gram-Schmidt pass for orthogonality to ~eps
                e -= (b @ e) * b
            norm = np.linalg.norm(e)
            if norm > 0.5:
                break
        e /= norm
        basis.append(e)
        out[:, j] = e
    return out


def thin_svd(a) -> ThinSvd:
    """Thin SVD of an m x n matrix with n <= m by one-sided Jacobi rotations."""
    a = as_matrix(a)
    m, n = a.shape
    if n > m:
        raise DimensionError(f"thin_svd needs rows >= cols, got {a.shape}")
    w, v, _ = _kernels.jacobi_svd(np.ascontiguousarray(a), max(m, 1) * _EPS)
    w = np.asarray(w)
    v = np.asarray(v)
    s = np.sqrt(np.sum(w * w, axis=0))
    order = np.argsort(-s, kind="stable")
    s, w, v = s[order], w[:, order], v[:, order]
    smax = s[0] if n else 0.0
    good = s > max(m, n) * _EPS * smax if smax > 0 else np.zeros(n, dtype=bool)
    u = np.zeros_like(w)
    u[:, good] = w[:, good] / s[good]
    if not np.all(good):
        u = _complete_basis(u, good)
    signs = _fix_signs(u)
    return ThinSvd(u * signs, s, v * signs)


def woodbury_latent_inverse(lam) -> np.ndarray:
    """``[I - lam^T (I + lam lam^T)^-1 lam]^-1`` evaluated as ``I + lam^T lam``.

    ``lam`` is the noise-scaled loading matrix (n_x x n_z); the result lives
    entirely in the n_z x n_z latent space.
    """
    lam = as_matrix(lam, "lambda")
    return np.eye(lam.shape[1]) + lam.T @ lam


def spd_eig(a, name: str = "covariance") -> SymEig:
    """Eigendecomposition of a matrix that must be symmetric positive definite."""
    try:
        e = sym_eig(a)
    except SymmetryError as exc:
        raise FactorizationError(f"{name} is not symmetric") from exc
    if e.eigenvalues.size and e.eigenvalues[-1] <= 0.0:
        raise FactorizationError(f"{name} is not positive definite (min eigenvalue {e.eigenvalues[-1]:.3g})")
    return e


def spd_power(a, power: float, name: str = "covariance") -> np.ndarray:
    """Matrix power of an SPD matrix through its eigendecomposition."""
    e = spd_eig(a, name)
    return (e.eigenvectors * e.eigenvalues**power) @ e.eigenvectors.T
