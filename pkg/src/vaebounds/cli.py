"""``vaebounds`` command line: gen, fit-ppca, train, bracket, check.

Exit codes: 0 success, 2 usage/input/I-O errors, 3 internal invariant failures.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import sys
from pathlib import Path

from . import checks, io, ppca, trainer
from .exceptions import ContractError, VaeBoundsError

EXIT_USAGE = 2
EXIT_INVARIANT = 3


class _InvariantFailure(Exception):
    pass


def _err(msg: str) -> None:
    print(f"vaebounds: {msg}", file=sys.stderr)


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _model_path_for(out: str) -> str:
    p = Path(out)
    return str(p.with_name(p.stem + ".model.json"))


def cmd_gen(a) -> int:
    data, truth = trainer.generate_synthetic(a.nx, a.nz, a.sigma, a.n, a.seed)
    model_out = a.model_out or _model_path_for(a.out)
    _emit({"command": "gen", "nx": a.nx, "nz": a.nz, "sigma": a.sigma, "n": a.n, "seed": a.seed,
           "out": a.out, "model_out": model_out})
    io.write_csv(a.out, data.points)
    io.save_model(model_out, truth)
    return 0


def cmd_fit_ppca(a) -> int:
    sigma = a.sigma if a.sigma == "auto" else float(a.sigma)
    _emit({"command": "fit-ppca", "data": a.data, "nz": a.nz, "sigma": a.sigma, "header": a.header, "out": a.out})
    data = io.read_csv(a.data, header=a.header)
    model = ppca.fit_ppca(data, a.nz, sigma)
    io.save_model(a.out, model)
    _emit({"sigma": model.sigma, "n_x": model.n_x, "n_z": model.n_z})
    return 0


# flag name -> TrainConfig field
_OVERRIDES = {
    "objective": "objective",
    "partner": "partner",
    "nx": "n_x",
    "nz": "n_z",
    "sigma": "sigma",
    "n": "n_points",
    "data": "csv_path",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "lr": "lr",
    "lr_decay": "lr_decay",
    "optimizer": "optimizer",
    "mc_samples": "mc_samples",
    "eval_mc_samples": "eval_mc_samples",
    "eval_every": "eval_every",
    "hidden": "hidden",
    "seed": "seed",
    "metrics": "metrics_path",
    "checkpoint": "checkpoint_path",
}


def _resolve(a) -> trainer.TrainConfig:
    overrides = {field: getattr(a, flag) for flag, field in _OVERRIDES.items() if getattr(a, flag, None) is not None}
    cfg = trainer.load_config(a.config, overrides)
    _emit({"command": a.command, "config": cfg.to_dict()})
    return cfg


def _final_rows(report: trainer.TrainReport) -> list[dict]:
    out = []
    for kind in dict.fromkeys(r.objective for r in report.rows):
        out.append(dataclasses.asdict(report.for_objective(kind)[-1]))
    return out


def cmd_train(a) -> int:
    cfg = _resolve(a)
    report = trainer.train(cfg)
    for row in _final_rows(report):
        _emit({"final": row})
    if report.aborted:
        raise _InvariantFailure("training aborted: " + report.rows[-1].status)
    return 0


def cmd_bracket(a) -> int:
    cfg = _resolve(a)
    report, status = trainer.bracket(cfg)
    if report.aborted:
        raise _InvariantFailure("training aborted: " + report.rows[-1].status)
    _emit({"width": status.width, "trend": status.trend, "encoder_gap": status.encoder_gap,
           "combined_se": status.combined_se})
    return 0


def cmd_check(a) -> int:
    _emit({"command": "check", "trials": a.trials, "seed": a.seed})
    results = checks.run_all(a.trials, a.seed)
    for r in results:
        print(f"{r.name}: {r.passed} passed, {r.failed} failed")
    failed = sum(r.failed for r in results)
    print(f"total: {sum(r.passed for r in results)} passed, {failed} failed")
    if failed:
        raise _InvariantFailure(f"{failed} check(s) failed")
    return 0


def _train_flags(p: argparse.ArgumentParser, seed_required: bool) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, required=seed_required)
    p.add_argument("--objective", choices=[k.value for k in trainer.ObjectiveKind])
    p.add_argument("--partner", choices=[k.value for k in trainer.ObjectiveKind])
    p.add_argument("--nx", type=int)
    p.add_argument("--nz", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--n", type=int, help="synthetic dataset size")
    p.add_argument("--data", help="CSV dataset instead of synthetic data")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lr-decay", type=float)
    p.add_argument("--optimizer", choices=["sgd", "adam"])
    p.add_argument("--mc-samples", type=int)
    p.add_argument("--eval-mc-samples", type=int)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--hidden", help="comma-separated hidden widths; empty for affine nets")
    p.add_argument("--metrics", help="JSON-lines metrics output")
    p.add_argument("--checkpoint", help="checkpoint output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vaebounds", description="ELBO/EUBO bounds on P-PCA data")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="sample a synthetic P-PCA dataset")
    g.add_argument("--nx", type=int, required=True)
    g.add_argument("--nz", type=int, required=True)
    g.add_argument("--sigma", type=float, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--model-out", help="ground-truth model file (default: <out stem>.model.json)")
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("fit-ppca", help="fit P-PCA to a CSV dataset")
    f.add_argument("--data", required=True)
    f.add_argument("--nz", type=int, required=True)
    f.add_argument("--sigma", default="auto")
    f.add_argument("--header", action="store_true")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit_ppca)

    t = sub.add_parser("train", help="train one objective")
    _train_flags(t, seed_required=True)
    t.set_defaults(func=cmd_train)

    b = sub.add_parser("bracket", help="co-train ELBO and EUBO models and report the bracket")
    _train_flags(b, seed_required=False)
    b.set_defaults(func=cmd_bracket)

    c = sub.add_parser("check", help="run the seeded self-check suites")
    c.add_argument("--trials", type=int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return a.func(a)
    except _InvariantFailure as e:
        _err(str(e))
        return EXIT_INVARIANT
    except ContractError as e:
        _err(f"internal invariant violated: {e}")
        return EXIT_INVARIANT
    except (OSError, ValueError, configparser.Error, VaeBoundsError) as e:
        _err(str(e))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
