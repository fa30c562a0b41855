"""Command-line entry point: ``mixcal <subcommand> ...``.

Exit codes: 0 success, 2 bad arguments or config, 3 numerical failure or
degenerate classifier.  Data goes to stdout or ``--out``; diagnostics go
to stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments as ex
from ._io import dumps_json
from .analytic import alignment, analytic_ece, analytic_ece_shrunk, analytic_mce
from .empirical import BinSpec, binned_calibration, confidence_scores
from .errors import DegenerateClassifierError, MixcalError, NumericalFailure
from .model import ModelParams, read_dataset_csv, sample_dataset, write_dataset_csv
from .numerics import QuadratureSpec, make_rng

SEED_ENV = "MIXCAL_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _vector(text: str) -> np.ndarray:
    try:
        v = np.array([float(s) for s in text.split(",")], dtype=float)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not np.all(np.isfinite(v)):
        raise argparse.ArgumentTypeError("vector entries must be finite")
    return v


def _floats(text: str):
    return tuple(float(x) for x in _vector(text))


def _positive_int(text: str) -> int:
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if k < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {k}")
    return k


def _nonneg_int(text: str) -> int:
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if k < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {k}")
    return k


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        s = int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer")
    if s < 0:
        raise UsageError(f"{SEED_ENV} must be nonnegative")
    return s


def _write(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(out).write_text(text)


def cmd_simulate(args) -> None:
    params = ModelParams.canonical(args.p, args.theta_norm, args.sigma)
    data = sample_dataset(params, args.n, make_rng(_seed(args), 0))
    if args.out is None:
        raise UsageError("simulate needs --out")
    write_dataset_csv(data, args.out)


def cmd_analytic(args) -> None:
    quad = QuadratureSpec(node_count=args.quad_nodes, max_nodes=max(args.quad_nodes, 2048))
    a = alignment(args.theta_hat, args.theta_star)
    out = {"rho": a.rho, "m": a.m, "s": a.s}
    if args.shrink is None:
        out["ece"] = analytic_ece(args.theta_hat, args.theta_star, quad)
        c = 1.0
    else:
        c = args.shrink
        out["shrink"] = c
        out["ece"] = analytic_ece_shrunk(a, c, quad)
    if args.mce:
        sol = analytic_mce(a, c)
        out.update(mce=sol.value, v_star=sol.v_star, at_boundary=sol.at_boundary)
    _write(dumps_json(out), None)


def cmd_reliability(args) -> None:
    data = read_dataset_csv(args.data)
    if args.theta_hat.size != data.p:
        raise UsageError(f"--theta-hat has {args.theta_hat.size} entries, data has p = {data.p}")
    report = binned_calibration(confidence_scores(args.theta_hat, data), BinSpec(args.scheme, args.bins))
    text = report.to_json() if args.format == "json" else report.to_csv()
    _write(text, args.out)


def _theorem_config(args) -> ex.TrialConfig:
    base = ex.TrialConfig.from_json_file(args.config) if args.config else ex.default_config(args.id)
    overrides = {}
    for name in ("p", "n_l", "n_u", "theta_norm", "sigma", "trials", "t_grid", "ood_delta_scale"):
        v = getattr(args, name)
        if v is not None:
            overrides[name] = v
    if args.seed is not None or os.environ.get(SEED_ENV) is not None or not args.config:
        overrides["seed"] = _seed(args)
    return replace(base, **overrides)


def cmd_theorem(args) -> None:
    config = _theorem_config(args)
    ex._validate_for(args.id, config)
    records = ex.run_trials(config, args.workers)
    verdict = ex.summarize(args.id, config, records)
    if args.table:
        Path(args.table).write_text(ex.render_report(records, "csv"))
    _write(ex.render_report(verdict, args.format), args.out)


def cmd_sweep(args) -> None:
    base = ex.TrialConfig.from_json_file(args.config) if args.config else ex.default_config("T3")
    overrides = {"seed": _seed(args)}
    for name in ("n_l", "theta_norm", "trials"):
        v = getattr(args, name)
        if v is not None:
            overrides[name] = v
    rows = ex.sweep_ratio(replace(base, **overrides), args.ratios, args.workers)
    _write(ex.render_report(rows, args.format), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mixcal", description="Calibration of Mixup under the Gaussian model.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="sample a dataset and write it as CSV")
    p.add_argument("--p", type=_positive_int, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--theta-norm", type=float, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=_nonneg_int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analytic", help="exact ECE (and MCE) of a weight vector, as JSON")
    p.add_argument("--theta-hat", type=_vector, required=True)
    p.add_argument("--theta-star", type=_vector, required=True)
    p.add_argument("--shrink", type=float, help="shrink factor c in (0, 1]")
    p.add_argument("--mce", action="store_true")
    p.add_argument("--quad-nodes", type=_positive_int, default=128)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("reliability", help="binned reliability report of a scored dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--theta-hat", type=_vector, required=True)
    p.add_argument("--bins", type=_positive_int, default=15)
    p.add_argument("--scheme", choices=("equal_width", "equal_mass"), default="equal_width")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_reliability)

    p = sub.add_parser("theorem", help="seeded check of one theorem's inequality")
    p.add_argument("--id", choices=ex.THEOREMS, required=True)
    p.add_argument("--trials", type=_positive_int)
    p.add_argument("--seed", type=_nonneg_int)
    p.add_argument("--p", type=_positive_int)
    p.add_argument("--n-l", type=_positive_int)
    p.add_argument("--n-u", type=_nonneg_int)
    p.add_argument("--theta-norm", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--t-grid", type=_floats)
    p.add_argument("--ood-delta-scale", type=float)
    p.add_argument("--config", help="JSON file with TrialConfig fields")
    p.add_argument("--workers", type=_positive_int, default=ex.default_workers())
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--table", help="also write the per-trial CSV table here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_theorem)

    p = sub.add_parser("sweep", help="mean derivatives at t = 0 across p / n_l ratios")
    p.add_argument("--ratios", type=_floats, required=True)
    p.add_argument("--n-l", type=_positive_int)
    p.add_argument("--theta-norm", type=float)
    p.add_argument("--trials", type=_positive_int)
    p.add_argument("--seed", type=_nonneg_int)
    p.add_argument("--config", help="JSON file with TrialConfig fields")
    p.add_argument("--workers", type=_positive_int, default=ex.default_workers())
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (NumericalFailure, DegenerateClassifierError, ArithmeticError) as exc:
        print(f"mixcal: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (UsageError, MixcalError, ValueError) as exc:
        print(f"mixcal: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"mixcal: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main_entry() -> None:
    sys.exit(main())
