"""Synthetic P-PCA data, minibatch training loops and the ELBO/EUBO bracket monitor."""
from __future__ import annotations

import configparser
import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io, nets, objectives, ppca
from .divergence import kl_diag_terms
from .exceptions import ContractError, DimensionError
from .objectives import NET_ROLES, ObjectiveKind

log = logging.getLogger(__name__)


def generate_synthetic(n_x: int, n_z: int, sigma: float, n_points: int, seed):
    """Draw a ground-truth P-PCA model and ``n_points`` samples from it.

    The loading matrix has orthonormal columns (QR of a seeded Gaussian
    matrix) scaled by 1, 1/2, 1/4, ...
    """
    if not 1 <= n_z <= n_x:
        raise DimensionError(f"n_z={n_z} outside [1, {n_x}]")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    rng = ppca.make_rng((seed, 0))
    q, r = np.linalg.qr(rng.standard_normal((n_x, n_z)))
    q = q * np.sign(np.diag(r))
    c_r = q * 2.0 ** -np.arange(n_z)
    truth = ppca.PpcaModel.from_loading(c_r, sigma)
    return ppca.sample(truth, n_points, (seed, 1)), truth


@dataclass
class TrainConfig:
    objective: ObjectiveKind = ObjectiveKind.ELBO
    n_x: int = 16
    n_z: int = 3
    sigma: float = 0.1
    n_points: int = 2000
    csv_path: str | None = None
    csv_header: bool = False
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    lr_decay: float = 1.0
    optimizer: str = "adam"
    mc_samples: int = 1
    seed: int = 0
    eval_every: int = 10
    eval_mc_samples: int = 256
    eval_fraction: float = 0.2
    hidden: tuple[int, ...] = (64,)
    decoder: str = "learned"
    ppca_sigma: str | float = "auto"
    partner: ObjectiveKind | None = None
    metrics_path: str | None = None
    checkpoint_path: str | None = None
    timing: bool = False

    def __post_init__(self):
        self.objective = ObjectiveKind(self.objective)
        if self.partner is not None:
            self.partner = ObjectiveKind(self.partner)
        self.hidden = tuple(int(h) for h in self.hidden)

    def validate(self, n_available: int | None = None) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.mc_samples < 1 or self.eval_mc_samples < 2:
            raise ValueError("mc_samples must be >= 1 and eval_mc_samples >= 2")
        if not 1 <= self.n_z <= self.n_x:
            raise DimensionError(f"n_z={self.n_z} outside [1, {self.n_x}]")
        if not 0.0 < self.eval_fraction < 1.0:
            raise ValueError("eval_fraction must lie in (0, 1)")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must lie in (0, 1]")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.decoder not in ("learned", "ppca"):
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if n_available is not None and self.batch_size > n_available:
            raise ValueError(f"batch_size {self.batch_size} exceeds {n_available} training points")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["objective"] = self.objective.value
        d["partner"] = self.partner.value if self.partner else None
        d["hidden"] = list(self.hidden)
        return d


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(TrainConfig)}


def _coerce(key: str, raw):
    if key not in _FIELD_TYPES:
        raise ValueError(f"unknown config key {key!r}")
    if raw is None:
        return None
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    if key == "hidden":
        return tuple(int(t) for t in raw.replace(",", " ").split()) if raw else ()
    if key in ("csv_header", "timing"):
        if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"{key} must be a boolean, got {raw!r}")
        return raw.lower() in ("true", "1", "yes")
    if key in ("partner", "csv_path", "metrics_path", "checkpoint_path") and raw.lower() in ("", "none"):
        return None
    if key == "ppca_sigma":
        return raw if raw == "auto" else float(raw)
    typ = _FIELD_TYPES[key]
    if typ in ("int", int):
        return int(raw)
    if typ in ("float", float):
        return float(raw)
    return raw


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines (an optional ``[train]`` header is allowed)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    body = text if text.lstrip().startswith("[") else "[train]\n" + text
    cp.read_string(body)
    if not cp.has_section("train") or len(cp.sections()) != 1:
        raise ValueError("config must contain exactly one [train] section")
    return {k: _coerce(k, v) for k, v in cp.items("train")}


def load_config(path, overrides: dict | None = None) -> TrainConfig:
    values = parse_config_text(Path(path).read_text()) if path else {}
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = _coerce(k, v)
    return TrainConfig(**values)


@dataclass
class EvalRow:
    epoch: int
    objective: str
    status: str
    value: float | None
    se: float | None
    gap_se: float | None
    recon: float | None
    regu: float | None
    extra: float | None
    evidence: float | None
    encoder_gap: float | None
    wall_time: float | None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=False, allow_nan=False)


@dataclass
class TrainReport:
    config: TrainConfig
    rows: list[EvalRow] = field(default_factory=list)
    nets: dict = field(default_factory=dict, repr=False)
    aborted: bool = False

    def for_objective(self, kind) -> list[EvalRow]:
        kind = ObjectiveKind(kind).value
        return [r for r in self.rows if r.objective == kind]

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for row in self.rows:
                fh.write(row.to_json() + "\n")


@dataclass
class ConvergenceStatus:
    width: float
    trend: str
    encoder_gap: float | None
    combined_se: float | None
    widths: list[float]
    epochs: list[int]


class _Model:
    """One objective's networks, optimizer and fixed P-PCA encoder."""

    def __init__(self, kind, cfg: TrainConfig, n_x: int, ppca_model):
        self.kind = kind
        self.nets = {}
        for role in NET_ROLES[kind]:
            # same role -> same initial weights, so co-trained models start level
            base = role.split("_")[0]
            a, b = (n_x, cfg.n_z) if base == "enc" else (cfg.n_z, n_x)
            self.nets[role] = nets.MlpGaussianNet.create(a, b, cfg.hidden, seed=(cfg.seed, 7, _ROLE_IDS[role]))
        self.opt = nets.Optimizer(cfg.optimizer, cfg.lr)
        self.ppca = ppca_model
        self.decoder = cfg.decoder

    def params(self):
        return [p for role in NET_ROLES[self.kind] for p in self.nets[role].params()]

    def update(self, batch, mc_samples, seed) -> float:
        loss, grads = objectives.loss_and_grads(self.kind, self.nets, batch, mc_samples, seed, self.ppca, self.decoder)
        if not math.isfinite(loss):
            return loss
        flat = [g for role in NET_ROLES[self.kind] for g in grads[role]]
        new = nets.step(self.opt, self.params(), flat)
        i = 0
        for role in NET_ROLES[self.kind]:
            n = len(self.nets[role].params())
            self.nets[role].set_params(new[i:i + n])
            i += n
        return loss


_ROLE_IDS = {"enc_v": 0, "dec": 1, "enc_y": 2, "enc_u": 3, "dec_v": 1, "dec_u": 4}


def _encoder_gap(model: _Model, x) -> float | None:
    other = "enc_y" if "enc_y" in model.nets else "enc_u" if "enc_u" in model.nets else None
    if other is None:
        return None
    mv, lv = model.nets["enc_v"].apply(x)
    mo, lo = model.nets[other].apply(x)
    return float(np.mean(kl_diag_terms(mv, np.exp(lv), mo, np.exp(lo))))


def _finite(v):
    return v if v is not None and math.isfinite(v) else None


def _eval_row(model: _Model, epoch, x, evidence, cfg: TrainConfig, t0) -> EvalRow:
    est = objectives.evaluate(model.kind, model.nets, x, cfg.eval_mc_samples, (cfg.seed, 4), model.ppca, model.decoder)
    ev_mean = gap_se = None
    if evidence is not None:
        ev_mean = float(evidence.mean())
        gap_se = float(np.std(est.per_point - evidence, ddof=1) / math.sqrt(len(evidence)))
    vals = [est.value, est.se, est.recon, est.regu, est.extra]
    status = "ok" if all(math.isfinite(v) for v in vals) else "aborted: non-finite evaluation"
    return EvalRow(
        epoch=epoch,
        objective=model.kind.value,
        status=status,
        value=_finite(est.value),
        se=_finite(est.se),
        gap_se=_finite(gap_se),
        recon=_finite(est.recon),
        regu=_finite(est.regu),
        extra=_finite(est.extra),
        evidence=ev_mean,
        encoder_gap=_finite(_encoder_gap(model, x)),
        wall_time=round(time.perf_counter() - t0, 6) if cfg.timing else None,
    )


def _abort_row(kind, epoch, reason, t0, cfg) -> EvalRow:
    return EvalRow(epoch, kind.value, f"aborted: {reason}", None, None, None, None, None, None, None, None,
                   round(time.perf_counter() - t0, 6) if cfg.timing else None)


def load_data(cfg: TrainConfig):
    """``(train_x, eval_x, truth)``; ``truth`` is None for CSV data."""
    if cfg.csv_path:
        data = io.read_csv(cfg.csv_path, header=cfg.csv_header, n_x=cfg.n_x)
        truth = None
    else:
        data, truth = generate_synthetic(cfg.n_x, cfg.n_z, cfg.sigma, cfg.n_points, cfg.seed)
    x = data.points
    perm = ppca.make_rng((cfg.seed, 2)).permutation(x.shape[0])
    n_eval = max(1, int(round(cfg.eval_fraction * x.shape[0])))
    if n_eval >= x.shape[0]:
        raise ValueError("dataset too small for a held-out split")
    eval_x, train_x = x[perm[:n_eval]], x[perm[n_eval:]]
    if truth is None:
        shift = train_x.mean(axis=0)
        train_x, eval_x = train_x - shift, eval_x - shift
    return train_x, eval_x, truth


def train(cfg: TrainConfig) -> TrainReport:
    """Train ``cfg.objective`` (and ``cfg.partner`` in lock-step, if set)."""
    train_x, eval_x, truth = load_data(cfg)
    cfg.validate(train_x.shape[0])
    kinds = [cfg.objective] + ([cfg.partner] if cfg.partner and cfg.partner != cfg.objective else [])
    ppca_model = None
    if ObjectiveKind.VAE_A in kinds:
        ppca_model = ppca.fit_ppca(ppca.Dataset(train_x), cfg.n_z, cfg.ppca_sigma)
    models = [_Model(k, cfg, train_x.shape[1], ppca_model) for k in kinds]
    evidence = ppca.evidence_logpdf(truth, eval_x) if truth is not None else None
    report = TrainReport(cfg)
    t0 = time.perf_counter()
    for m in models:
        report.rows.append(_eval_row(m, 0, eval_x, evidence, cfg, t0))

    n_batches = train_x.shape[0] // cfg.batch_size
    live = list(models)
    for epoch in range(1, cfg.epochs + 1):
        # exponential schedule: lr at epoch 1, lr * lr_decay at the last epoch
        frac = (epoch - 1) / max(cfg.epochs - 1, 1)
        for m in live:
            m.opt.lr = cfg.lr * cfg.lr_decay**frac
        order = ppca.make_rng((cfg.seed, 3, epoch)).permutation(train_x.shape[0])
        for b in range(n_batches):
            batch = train_x[order[b * cfg.batch_size:(b + 1) * cfg.batch_size]]
            seed = (cfg.seed, 5, epoch, b)
            for m in list(live):
                loss = m.update(batch, cfg.mc_samples, seed)
                if not math.isfinite(loss):
                    log.warning("%s: non-finite loss at epoch %d batch %d", m.kind.value, epoch, b)
                    report.rows.append(_abort_row(m.kind, epoch, f"non-finite loss at batch {b}", t0, cfg))
                    report.aborted = True
                    live.remove(m)
        if not live:
            break
        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            for m in live:
                row = _eval_row(m, epoch, eval_x, evidence, cfg, t0)
                report.rows.append(row)
                if row.status != "ok":
                    report.aborted = True
                    live.remove(m)
            if not live:
                break

    report.nets = {m.kind.value: m.nets for m in models}
    if cfg.metrics_path:
        report.write_jsonl(cfg.metrics_path)
    if cfg.checkpoint_path:
        all_nets = {f"{m.kind.value}.{role}": net for m in models for role, net in m.nets.items()}
        nets.save_checkpoint(cfg.checkpoint_path, all_nets, models[0].opt)
    return report


TREND_TOL = 1e-3
TREND_WINDOW = 10


def bracket_monitor(elbo_rows, eubo_rows) -> ConvergenceStatus:
    """Bracket width ``EUBO - ELBO`` per evaluation and its recent trend."""
    elbo_rows = [r for r in elbo_rows if r.status == "ok"]
    eubo_rows = [r for r in eubo_rows if r.status == "ok"]
    if [r.epoch for r in elbo_rows] != [r.epoch for r in eubo_rows]:
        raise ContractError("ELBO and EUBO rows were not evaluated at the same epochs")
    if not elbo_rows:
        raise ContractError("no evaluations to compare")
    widths = [u.value - lo.value for lo, u in zip(elbo_rows, eubo_rows)]
    tail = np.asarray(widths[-TREND_WINDOW:])
    if tail.size < 2:
        trend = "stalled"
    else:
        slope = np.polyfit(np.arange(tail.size, dtype=float), tail, 1)[0]
        trend = "shrinking" if slope < -TREND_TOL else "diverging" if slope > TREND_TOL else "stalled"
    last_lo, last_up = elbo_rows[-1], eubo_rows[-1]
    ses = [last_lo.gap_se, last_up.gap_se]
    if None in ses:
        ses = [last_lo.se, last_up.se]
    combined = math.sqrt(sum(s * s for s in ses)) if None not in ses else None
    return ConvergenceStatus(
        width=widths[-1],
        trend=trend,
        encoder_gap=last_up.encoder_gap,
        combined_se=combined,
        widths=widths,
        epochs=[r.epoch for r in elbo_rows],
    )


def bracket(cfg: TrainConfig) -> tuple[TrainReport, ConvergenceStatus]:
    """Co-train an ELBO and an EUBO model on the same stream and monitor their bracket."""
    cfg = dataclasses.replace(cfg, objective=ObjectiveKind.ELBO, partner=ObjectiveKind.EUBO)
    report = train(cfg)
    status = bracket_monitor(report.for_objective("elbo"), report.for_objective("eubo"))
    return report, status
