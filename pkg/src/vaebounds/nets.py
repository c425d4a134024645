"""Small MLPs with diagonal-Gaussian outputs, reparameterised sampling and optimizers."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .distributions import DiagGaussian
from .exceptions import DimensionError
from .ppca import make_rng

LOGVAR_MIN, LOGVAR_MAX = -10.0, 10.0
LOGVAR_BIAS_INIT = -1.0


@dataclass
class MlpGaussianNet:
    """tanh MLP whose last layer holds a mean head and a log-variance head.

    ``widths`` runs input -> hidden ... -> 2 * output.
    """

    widths: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.widths) < 2 or self.widths[-1] % 2:
            raise DimensionError(f"bad widths {self.widths}")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.widths[i], self.widths[i + 1]) or b.shape != (self.widths[i + 1],):
                raise DimensionError(f"layer {i} parameter shapes do not match widths {self.widths}")

    @classmethod
    def create(cls, in_dim: int, out_dim: int, hidden=(64,), seed=0) -> "MlpGaussianNet":
        widths = [int(in_dim), *map(int, hidden), 2 * int(out_dim)]
        rng = make_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        biases[-1][out_dim:] = LOGVAR_BIAS_INIT
        return cls(widths, weights, biases)

    @classmethod
    def zeros(cls, in_dim: int, out_dim: int, hidden=()) -> "MlpGaussianNet":
        widths = [in_dim, *hidden, 2 * out_dim]
        return cls(
            widths,
            [np.zeros((a, b)) for a, b in zip(widths[:-1], widths[1:])],
            [np.zeros(b) for b in widths[1:]],
        )

    @property
    def in_dim(self) -> int:
        return self.widths[0]

    @property
    def out_dim(self) -> int:
        return self.widths[-1] // 2

    @property
    def n_params(self) -> int:
        return sum(a * b + b for a, b in zip(self.widths[:-1], self.widths[1:]))

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def set_params(self, params) -> None:
        params = list(params)
        if len(params) != 2 * len(self.weights):
            raise DimensionError("wrong number of parameter arrays")
        for i in range(len(self.weights)):
            w, b = np.asarray(params[2 * i], float), np.asarray(params[2 * i + 1], float)
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise DimensionError(f"layer {i} shape mismatch")
            self.weights[i], self.biases[i] = w.copy(), b.copy()

    def copy(self) -> "MlpGaussianNet":
        return MlpGaussianNet(list(self.widths), [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def apply(self, x, params=None):
        """Return ``(mean, log_variance)``; works with arrays or tape tensors.

        ``params`` overrides the stored parameters (e.g. watched tensors).
        """
        p = self.params() if params is None else params
        n_layers = len(p) // 2
        h = x
        for i in range(n_layers):
            h = h @ p[2 * i] + p[2 * i + 1]
            if i < n_layers - 1:
                h = ad.tanh(h)
        k = self.out_dim
        mean = h[..., :k]
        log_var = ad.clip(h[..., k:], LOGVAR_MIN, LOGVAR_MAX)
        return mean, log_var


def forward(net: MlpGaussianNet, x) -> DiagGaussian:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.in_dim:
        raise DimensionError(f"input has {x.shape[-1]} features, net expects {net.in_dim}")
    mean, log_var = net.apply(x)
    return DiagGaussian(mean, np.exp(log_var))


def reparam_sample(g, eps):
    """``mean + sqrt(variance) * eps``.

    ``g`` is a :class:`DiagGaussian` or a ``(mean, log_variance)`` pair of
    arrays/tensors; the latter keeps the sample on the gradient tape.
    """
    if isinstance(g, DiagGaussian):
        eps = np.asarray(eps, dtype=np.float64)
        if eps.shape[-1] != g.dim:
            raise DimensionError(f"eps has {eps.shape[-1]} entries, expected {g.dim}")
        return g.mean + np.sqrt(g.variance) * eps
    mean, log_var = g
    return mean + ad.exp(0.5 * log_var) * eps


@dataclass
class Optimizer:
    kind: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")

    def state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "t": self.t,
            "m": [a.ravel().tolist() for a in self.m],
            "v": [a.ravel().tolist() for a in self.v],
        }


def step(opt: Optimizer, params, grads) -> list[np.ndarray]:
    """One optimizer update; returns new parameter arrays and advances ``opt``."""
    params = [np.asarray(p, dtype=np.float64) for p in params]
    grads = [np.asarray(g, dtype=np.float64) for g in grads]
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise DimensionError("parameter and gradient shapes differ")
    opt.t += 1
    if opt.kind == "sgd":
        return [p - opt.lr * g for p, g in zip(params, grads)]
    if not opt.m:
        opt.m = [np.zeros_like(p) for p in params]
        opt.v = [np.zeros_like(p) for p in params]
    elif any(m.shape != p.shape for m, p in zip(opt.m, params)) or len(opt.m) != len(params):
        raise DimensionError("optimizer moments do not match parameters")
    c1 = 1.0 - opt.beta1**opt.t
    c2 = 1.0 - opt.beta2**opt.t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * g
        opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * g * g
        out.append(p - opt.lr * (opt.m[i] / c1) / (np.sqrt(opt.v[i] / c2) + opt.eps))
    return out


def save_checkpoint(path, nets: dict[str, MlpGaussianNet], opt: Optimizer | None = None) -> None:
    doc = {
        "nets": {
            name: {"widths": net.widths, "params": [p.ravel().tolist() for p in net.params()]}
            for name, net in nets.items()
        },
        "optimizer": opt.state_dict() if opt is not None else None,
        "step": opt.t if opt is not None else 0,
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> tuple[dict[str, MlpGaussianNet], Optimizer | None]:
    doc = json.loads(Path(path).read_text())
    nets = {}
    for name, entry in doc["nets"].items():
        widths = [int(w) for w in entry["widths"]]
        net = MlpGaussianNet.zeros(widths[0], widths[-1] // 2, widths[1:-1])
        shapes = [s for a, b in zip(widths[:-1], widths[1:]) for s in ((a, b), (b,))]
        net.set_params([np.asarray(p, dtype=np.float64).reshape(s) for p, s in zip(entry["params"], shapes)])
        nets[name] = net
    opt = None
    if doc.get("optimizer"):
        st = doc["optimizer"]
        opt = Optimizer(st["kind"], st["lr"], st["beta1"], st["beta2"], st["eps"], st["t"])
        params = [p for net in nets.values() for p in net.params()]
        if st["m"]:
            opt.m = [np.asarray(a).reshape(p.shape) for a, p in zip(st["m"], params)]
            opt.v = [np.asarray(a).reshape(p.shape) for a, p in zip(st["v"], params)]
    return nets, opt
