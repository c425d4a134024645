"""Seeded self-checks run by ``vaebounds check``.

Each suite draws ``trials`` random instances and returns ``(passed, failed)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import divergence, linalg, nets, objectives, ppca
from .distributions import DiagGaussian


@dataclass
class SuiteResult:
    name: str
    passed: int
    failed: int

    def __post_init__(self):
        self.passed, self.failed = int(self.passed), int(self.failed)

    @property
    def ok(self) -> bool:
        return self.failed == 0


def random_spd(rng, n: int, cond: float = 100.0) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (q * np.exp(rng.uniform(0.0, np.log(cond), n))) @ q.T


def svd_oracle(trials: int, seed) -> SuiteResult:
    """SVD-reduced ``D[V||W]`` against the dense closed form."""
    rng = ppca.make_rng((seed, 11))
    ok = 0
    for _ in range(trials):
        n_x = int(rng.choice([8, 16, 32]))
        n_z = int(rng.integers(1, 9))
        model = ppca.PpcaModel.from_loading(rng.standard_normal((n_x, n_z)), float(rng.uniform(0.05, 2.0)))
        v = DiagGaussian(rng.standard_normal(n_z), np.exp(rng.uniform(-2, 1, n_z)))
        x = rng.standard_normal(n_x)
        fast, dense = divergence.kl_v_w_svd(v, model, x), divergence.kl_v_w_dense(v, model, x)
        ok += abs(fast - dense) <= 1e-8 * max(abs(dense), 1e-300)
    return SuiteResult("svd_oracle", ok, trials - ok)


def positivity(trials: int, seed) -> SuiteResult:
    rng = ppca.make_rng((seed, 12))
    ok = 0
    for _ in range(trials):
        n = int(rng.integers(1, 9))
        ok += divergence.positivity_residual(random_spd(rng, n), random_spd(rng, n)) >= -1e-10
    return SuiteResult("positivity", ok, trials - ok)


def woodbury(trials: int, seed) -> SuiteResult:
    """``I + L^T L`` against the inverse built from the dense n_x x n_x solve."""
    rng = ppca.make_rng((seed, 13))
    ok = 0
    for _ in range(trials):
        n_x, n_z = int(rng.integers(2, 17)), int(rng.integers(1, 5))
        n_z = min(n_z, n_x)
        lam = rng.standard_normal((n_x, n_z))
        fast = linalg.woodbury_latent_inverse(lam)
        dense = np.linalg.inv(np.eye(n_z) - lam.T @ np.linalg.solve(np.eye(n_x) + lam @ lam.T, lam))
        ok += np.linalg.norm(fast - dense) <= 1e-8 * np.linalg.norm(dense)
    return SuiteResult("woodbury", ok, trials - ok)


def gradient_errors(kind, seed, n_x=6, n_z=2, hidden=(8,), batch=4, h=1e-5, decoder="learned") -> np.ndarray:
    """Relative errors of tape gradients against central differences, one per parameter."""
    kind = objectives.ObjectiveKind(kind)
    rng = ppca.make_rng((seed, 14, list(objectives.ObjectiveKind).index(kind)))
    x = rng.standard_normal((batch, n_x))
    model = ppca.PpcaModel.from_loading(rng.standard_normal((n_x, n_z)), 0.5)
    nn = {}
    for i, role in enumerate(objectives.NET_ROLES[kind]):
        a, b = (n_x, n_z) if role.startswith("enc") else (n_z, n_x)
        nn[role] = nets.MlpGaussianNet.create(a, b, hidden, seed=(seed, i))
        for p in nn[role].params():
            p += 0.3 * rng.standard_normal(p.shape)
    eps_seed = (seed, 15)
    _, grads = objectives.loss_and_grads(kind, nn, x, 3, eps_seed, model, decoder)
    errs = []
    for role in objectives.NET_ROLES[kind]:
        for p, g in zip(nn[role].params(), grads[role]):
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + h
                fp = objectives.training_loss(kind, nn, x, 3, eps_seed, model, decoder)
                p[idx] = old - h
                fm = objectives.training_loss(kind, nn, x, 3, eps_seed, model, decoder)
                p[idx] = old
                fd = (fp - fm) / (2 * h)
                errs.append(abs(fd - g[idx]) / max(abs(fd), abs(g[idx]), 1e-6))
    return np.asarray(errs)


def gradients_ok(errs: np.ndarray) -> bool:
    return np.mean(errs <= 1e-4) >= 0.95 and errs.max() <= 1e-2


def gradients(trials: int, seed) -> SuiteResult:
    # finite differences are the slow suite; scale them down
    reps = max(1, trials // 50)
    ok = total = 0
    for kind in objectives.ObjectiveKind:
        for r in range(reps):
            ok += gradients_ok(gradient_errors(kind, (seed, r)))
            total += 1
    return SuiteResult("gradients", ok, total - ok)


SUITES = (svd_oracle, positivity, woodbury, gradients)


def run_all(trials: int, seed) -> list[SuiteResult]:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return [suite(trials, seed) for suite in SUITES]
