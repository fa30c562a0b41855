"""Seeded Monte Carlo checks of the Mixup calibration theorems.

A trial draws one training set from the Gaussian model, fits the plain,
Mixup and (optionally) pseudo-label estimators, and records their exact
population ECE/MCE.  Trial ``i`` uses RNG stream ``i`` under the config
seed, and all reductions run in trial order, so results do not depend on
how many workers run the trials.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ._io import dumps_json, fmt_float
from .analytic import (
    alignment,
    analytic_ece,
    analytic_ece_shrunk,
    analytic_mce,
    ece_derivative_at_zero,
    mce_derivative_at_zero,
)
from .empirical import BinSpec
from .errors import InvalidParameterError, NumericalFailure
from .estimators import BetaMixLaw, PseudoLabelPool, fisher_estimator, mixup_shrink, shrink_coefficient
from .model import ModelParams, _draw, boundary_shift, check_ood_condition, normalize_unit_sigma, sample_dataset
from .numerics import DEFAULT_QUAD, QuadratureSpec, compensated_sum, make_rng

THEOREMS = ("T1", "T2", "T3", "T4", "T6", "T7", "T8", "T9", "T10", "T11")
T_GRID = tuple(round(0.05 * k, 2) for k in range(1, 10))
MIX_FORMS = ("estimator", "shrunk")

# Unlabeled rows sampled per chunk; bounds memory for n_u * p in the 1e7+ range.
UNLABELED_CHUNK = 4096

TRIAL_CSV_COLUMNS = (
    "trial", "p", "n_l", "n_u", "theta_norm", "rho_plain", "ece_plain", "mce_plain",
    "deriv0", "t", "rho_mix", "ece_mix", "mce_mix",
)


def _as_t(entry) -> float:
    if isinstance(entry, (list, tuple)):
        return shrink_coefficient(BetaMixLaw(*entry))
    return float(entry)


@dataclass(frozen=True)
class TrialConfig:
    """One experimental regime.

    ``t_grid`` holds Mixup shrink coefficients in ``(0, 1/2)``; ``(alpha,
    beta)`` pairs are converted on construction.  ``ood_delta_scale``
    requests an out-of-domain shift with ``delta^T theta = scale * p /
    (2 n_l)`` on the unit-noise scale.  ``mix_form="shrunk"`` evaluates
    Mixup through the leading-order shrunk formula instead of the
    realised estimator.
    """

    p: int = 1000
    n_l: int = 1000
    n_u: int = 0
    theta_norm: float = 1.0
    sigma: float = 1.0
    t_grid: Tuple[float, ...] = T_GRID
    ood_delta_scale: Optional[float] = None
    trials: int = 100
    seed: int = 0
    bins: BinSpec = BinSpec()
    quad: QuadratureSpec = DEFAULT_QUAD
    mix_form: str = "estimator"

    def __post_init__(self):
        grid = tuple(_as_t(t) for t in self.t_grid)
        object.__setattr__(self, "t_grid", grid)
        if self.p < 1 or self.n_l < 1 or self.n_u < 0:
            raise InvalidParameterError("need p >= 1, n_l >= 1, n_u >= 0")
        if not (self.theta_norm > 0 and self.sigma > 0):
            raise InvalidParameterError("theta_norm and sigma must be positive")
        if any(not 0 < t < 0.5 for t in grid):
            raise InvalidParameterError(f"t_grid values must lie in (0, 1/2): {grid}")
        if self.trials < 1:
            raise InvalidParameterError("trials must be >= 1")
        if self.seed < 0:
            raise InvalidParameterError("seed must be nonnegative")
        if self.mix_form not in MIX_FORMS:
            raise InvalidParameterError(f"mix_form must be one of {MIX_FORMS}")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["t_grid"] = list(self.t_grid)
        d["bins"] = asdict(self.bins)
        d["quad"] = asdict(self.quad)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrialConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidParameterError(f"unknown config fields: {sorted(unknown)}")
        d = dict(d)
        if "bins" in d and isinstance(d["bins"], dict):
            d["bins"] = BinSpec(**d["bins"])
        if "quad" in d and isinstance(d["quad"], dict):
            d["quad"] = QuadratureSpec(**d["quad"])
        if "t_grid" in d:
            d["t_grid"] = tuple(tuple(t) if isinstance(t, list) else t for t in d["t_grid"])
        return cls(**d)

    @classmethod
    def from_json_file(cls, path) -> "TrialConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class MixPoint:
    t: float
    rho_mix: float
    ece_mix: float
    mce_mix: float


@dataclass(frozen=True)
class SemiBlock:
    rho_init: float
    rho_final: float
    ece_init: float
    ece_final: float
    ece_final_mix_best: float
    gamma_hat: float
    mce_init: float
    mce_final: float


@dataclass(frozen=True)
class OodBlock:
    condition_holds: bool
    ece_plain_ood: float
    ece_mix_best_ood: float


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    p: int
    n_l: int
    n_u: int
    theta_norm: float
    rho_plain: float
    ece_plain: float
    mce_plain: float
    derivative_at_zero: float
    mce_derivative_at_zero: float
    mix: Tuple[MixPoint, ...] = ()
    semi: Optional[SemiBlock] = None
    ood: Optional[OodBlock] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        d = dict(d)
        d["mix"] = tuple(MixPoint(**m) for m in d.get("mix", ()))
        d["semi"] = SemiBlock(**d["semi"]) if d.get("semi") else None
        d["ood"] = OodBlock(**d["ood"]) if d.get("ood") else None
        return cls(**{k: (math.nan if v is None else v) for k, v in d.items()})


@dataclass(frozen=True)
class Verdict:
    theorem_id: str
    trials: int
    holding: int
    fraction_holding: float
    mean_gap: float
    gap_ci95: Tuple[float, float]
    regime_notes: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gap_ci95"] = list(self.gap_ci95)
        d["regime_notes"] = list(self.regime_notes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Verdict":
        d = dict(d)
        d["gap_ci95"] = tuple(math.nan if v is None else v for v in d["gap_ci95"])
        d["regime_notes"] = tuple(d.get("regime_notes", ()))
        if d.get("mean_gap") is None:
            d["mean_gap"] = math.nan
        return cls(**d)


@dataclass(frozen=True)
class SweepRow:
    c_ratio: float
    p: int
    mean_derivative: float
    mean_mce_derivative: float
    mean_ece_plain: float
    mean_rho: float


def _mce(a, c=1.0):
    return analytic_mce(a, c).value


def _derivs(a, quad):
    if a.rho < 1:
        d_ece = ece_derivative_at_zero(a, quad)
        d_mce = mce_derivative_at_zero(a) if a.rho >= 0 else math.nan
        return d_ece, d_mce
    return math.nan, math.nan


def _mix_theta(theta_hat, cross, t):
    return mixup_shrink(theta_hat, cross, t)


def _trial(config: TrialConfig, trial_index: int) -> TrialRecord:
    quad = config.quad
    rng = make_rng(config.seed, trial_index)
    raw_params = ModelParams.canonical(config.p, config.theta_norm, config.sigma)
    labeled, params = normalize_unit_sigma(sample_dataset(raw_params, config.n_l, rng), raw_params)
    theta = params.theta

    theta_hat = fisher_estimator(labeled).theta_hat
    a = alignment(theta_hat, theta)
    ece_plain = analytic_ece(theta_hat, theta, quad)
    mce_plain = _mce(a)
    d_ece, d_mce = _derivs(a, quad)
    cross = labeled.features.mean(axis=0) * labeled.labels.mean()

    mix = []
    mix_thetas = []
    for t in config.t_grid:
        if config.mix_form == "estimator":
            th = _mix_theta(theta_hat, cross, t)
            a_t = alignment(th, theta)
            mix.append(MixPoint(t, a_t.rho, analytic_ece(th, theta, quad), _mce(a_t)))
            mix_thetas.append(th)
        else:
            c = 1.0 - t
            mix.append(MixPoint(t, a.rho / c, analytic_ece_shrunk(a, c, quad), _mce(a, c)))

    ood = None
    if config.ood_delta_scale is not None:
        theta_ood = theta + boundary_shift(theta, config.ood_delta_scale, config.p, config.n_l)
        holds = check_ood_condition(theta, theta_ood, config.p, config.n_l)
        e_plain = analytic_ece(theta_hat, theta_ood, quad)
        if config.mix_form == "estimator":
            e_mix = [analytic_ece(th, theta_ood, quad) for th in mix_thetas]
        else:
            a_ood = alignment(theta_hat, theta_ood)
            e_mix = [analytic_ece_shrunk(a_ood, 1.0 - t, quad) for t in config.t_grid]
        ood = OodBlock(holds, e_plain, min(e_mix) if e_mix else math.nan)

    semi = None
    if config.n_u > 0:
        pool = PseudoLabelPool(labeled)
        left = config.n_u
        while left:
            k = min(left, UNLABELED_CHUNK)
            y_true, x = _draw(raw_params, k, rng)
            pool.add(x / raw_params.sigma, y_true)
            left -= k
        final = pool.final().theta_hat
        a_f = alignment(final, theta)
        ece_final = analytic_ece(final, theta, quad)
        pooled = pool.pooled_cross()
        fm = [analytic_ece(_mix_theta(final, pooled, t), theta, quad) for t in config.t_grid]
        semi = SemiBlock(
            rho_init=a.rho,
            rho_final=a_f.rho,
            ece_init=ece_plain,
            ece_final=ece_final,
            ece_final_mix_best=min(fm) if fm else math.nan,
            gamma_hat=pool.gamma_hat(),
            mce_init=mce_plain,
            mce_final=_mce(a_f),
        )

    return TrialRecord(
        trial_index=trial_index,
        p=config.p,
        n_l=config.n_l,
        n_u=config.n_u,
        theta_norm=config.theta_norm,
        rho_plain=a.rho,
        ece_plain=ece_plain,
        mce_plain=mce_plain,
        derivative_at_zero=d_ece,
        mce_derivative_at_zero=d_mce,
        mix=tuple(mix),
        semi=semi,
        ood=ood,
    )


def run_trial(config: TrialConfig, trial_index: int) -> TrialRecord:
    """One trial; a pure function of ``(config, trial_index)``."""
    if trial_index < 0:
        raise InvalidParameterError("trial_index must be nonnegative")
    try:
        return _trial(config, trial_index)
    except NumericalFailure as exc:
        raise NumericalFailure(f"trial {trial_index}: {exc}", exc.estimates, trial_index) from exc


def _run_one(args):
    return run_trial(*args)


def default_workers() -> int:
    return os.cpu_count() or 1


def run_trials(config: TrialConfig, workers: int = 1) -> List[TrialRecord]:
    """All ``config.trials`` trials, returned in trial order."""
    jobs = [(config, i) for i in range(config.trials)]
    if workers <= 1 or config.trials == 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=max(1, config.trials // (4 * workers))))


DEFAULT_CONFIGS = {
    "T1": TrialConfig(p=1000, n_l=1000, theta_norm=1.0),
    "T2": TrialConfig(p=4, n_l=10_000, theta_norm=1.0, t_grid=(1.0 / 3.0,)),
    "T3": TrialConfig(p=1000, n_l=1000, theta_norm=1.0),
    "T4": TrialConfig(p=1000, n_l=1000, theta_norm=1.0, ood_delta_scale=0.5),
    "T6": TrialConfig(p=1000, n_l=50, n_u=50_000, theta_norm=math.sqrt(20.0)),
    "T7": TrialConfig(p=5, n_l=20_000, n_u=20_000, theta_norm=1.0),
    "T8": TrialConfig(p=5, n_l=20_000, n_u=20_000, theta_norm=1.0),
}
DEFAULT_CONFIGS["T9"] = DEFAULT_CONFIGS["T1"]
DEFAULT_CONFIGS["T10"] = DEFAULT_CONFIGS["T2"]
DEFAULT_CONFIGS["T11"] = DEFAULT_CONFIGS["T3"]


def default_config(theorem_id: str, **overrides) -> TrialConfig:
    if theorem_id not in DEFAULT_CONFIGS:
        raise InvalidParameterError(f"unknown theorem id {theorem_id!r}")
    return replace(DEFAULT_CONFIGS[theorem_id], **overrides)


def regime_notes(theorem_id: str, config: TrialConfig) -> Tuple[str, ...]:
    """Ways in which ``config`` departs from the theorem's intended regime."""
    ratio = config.p / config.n_l
    notes = []
    if theorem_id in ("T1", "T3", "T4", "T9", "T11") and not 0.5 <= ratio <= 2.0:
        notes.append(f"p/n_l = {ratio:g} outside the shipped high-dimensional band [0.5, 2]")
    if theorem_id in ("T2", "T10") and ratio > 0.01:
        notes.append(f"p/n_l = {ratio:g} is not small (low-dimensional regime expects <= 0.01)")
    if theorem_id == "T4":
        if config.ood_delta_scale is None:
            notes.append("no out-of-domain shift configured")
        elif config.ood_delta_scale > 1:
            notes.append("shift violates delta^T theta <= p/(2n)")
    if theorem_id in ("T6", "T7", "T8") and config.n_u == 0:
        notes.append("no unlabeled data (n_u = 0)")
    if theorem_id == "T6":
        scale = config.theta_norm / math.sqrt(ratio)
        if not 0.5 <= scale <= 2.0:
            notes.append(f"||theta|| / sqrt(p/n_l) = {scale:g} outside [0.5, 2]")
        if config.n_u < 100 * config.n_l:
            notes.append("n_u is not large relative to n_l")
    if theorem_id in ("T7", "T8") and config.p > 10:
        notes.append("pseudo-label harm regime expects fixed small p")
    return tuple(notes)


def _best(points, attr):
    return min(getattr(m, attr) for m in points)


def _outcome(theorem_id: str, r: TrialRecord, config: TrialConfig):
    """``(holds, gap)``; a positive gap means the inequality holds."""
    if theorem_id in ("T1", "T9"):
        if theorem_id == "T1":
            gap = r.ece_plain - _best(r.mix, "ece_mix")
        else:
            gap = r.mce_plain - _best(r.mix, "mce_mix")
        return gap > 0, gap
    if theorem_id in ("T2", "T10"):
        m = r.mix[0]
        gap = (m.ece_mix - r.ece_plain) if theorem_id == "T2" else (m.mce_mix - r.mce_plain)
        return gap > 0, gap
    if theorem_id in ("T3", "T11"):
        d = r.derivative_at_zero if theorem_id == "T3" else r.mce_derivative_at_zero
        return bool(d < 0), -d
    if theorem_id == "T4":
        o = r.ood
        gap = o.ece_plain_ood - o.ece_mix_best_ood
        return bool(o.condition_holds and gap > 0), gap
    s = r.semi
    if theorem_id == "T6":
        gap = s.ece_init - s.ece_final
    elif theorem_id == "T7":
        gap = s.ece_final - s.ece_init
    else:
        gap = s.ece_final - s.ece_final_mix_best
    return gap > 0, gap


def _validate_for(theorem_id: str, config: TrialConfig):
    if theorem_id not in THEOREMS:
        raise InvalidParameterError(f"unknown theorem id {theorem_id!r}; expected one of {THEOREMS}")
    if theorem_id in ("T1", "T4", "T8", "T9") and not config.t_grid:
        raise InvalidParameterError(f"{theorem_id} minimises over t_grid, which is empty")
    if theorem_id in ("T2", "T10") and len(config.t_grid) != 1:
        raise InvalidParameterError(f"{theorem_id} needs exactly one fixed t, got {len(config.t_grid)}")
    if theorem_id == "T4" and config.ood_delta_scale is None:
        raise InvalidParameterError("T4 needs ood_delta_scale")
    if theorem_id in ("T6", "T7", "T8") and config.n_u == 0:
        raise InvalidParameterError(f"{theorem_id} needs unlabeled data (n_u > 0)")


def summarize(theorem_id: str, config: TrialConfig, records: Sequence[TrialRecord]) -> Verdict:
    """Fold trial records into a verdict, reducing in trial order."""
    _validate_for(theorem_id, config)
    records = sorted(records, key=lambda r: r.trial_index)
    outcomes = [_outcome(theorem_id, r, config) for r in records]
    holding = sum(1 for h, _ in outcomes if h)
    gaps = [g for _, g in outcomes if math.isfinite(g)]
    if gaps:
        mean = compensated_sum(gaps) / len(gaps)
        if len(gaps) > 1:
            var = compensated_sum((g - mean) ** 2 for g in gaps) / (len(gaps) - 1)
            half = 1.959963984540054 * math.sqrt(var / len(gaps))
        else:
            half = 0.0
        ci = (mean - half, mean + half)
    else:
        mean, ci = math.nan, (math.nan, math.nan)
    n = len(records)
    return Verdict(theorem_id, n, holding, holding / n, mean, ci, regime_notes(theorem_id, config))


def check_theorem(theorem_id: str, config: Optional[TrialConfig] = None, workers: int = 1) -> Verdict:
    """Run ``config.trials`` trials and report how often the theorem's inequality holds."""
    if config is None:
        config = default_config(theorem_id)
    _validate_for(theorem_id, config)
    return summarize(theorem_id, config, run_trials(config, workers))


def sweep_ratio(base: TrialConfig, ratios: Sequence[float], workers: int = 1) -> List[SweepRow]:
    """Average derivatives at ``t = 0`` as ``p = round(ratio * n_l)`` varies."""
    ratios = [float(r) for r in ratios]
    if not ratios:
        raise InvalidParameterError("no ratios given")
    if any(b < a for a, b in zip(ratios, ratios[1:])):
        raise InvalidParameterError("ratios must be sorted ascending")
    rows = []
    for ratio in ratios:
        p = round(ratio * base.n_l)
        if p < 1:
            raise InvalidParameterError(f"ratio {ratio} gives p = 0 at n_l = {base.n_l}")
        recs = run_trials(replace(base, p=p), workers)

        def mean_of(attr):
            return compensated_sum(getattr(r, attr) for r in recs) / len(recs)

        rows.append(SweepRow(ratio, p, mean_of("derivative_at_zero"), mean_of("mce_derivative_at_zero"),
                             mean_of("ece_plain"), mean_of("rho_plain")))
    return rows


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return fmt_float(v)
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def trial_table_csv(records: Sequence[TrialRecord]) -> str:
    rows = []
    for r in records:
        base = [r.trial_index, r.p, r.n_l, r.n_u, float(r.theta_norm), r.rho_plain, r.ece_plain,
                r.mce_plain, r.derivative_at_zero]
        if not r.mix:
            rows.append(base + [None, None, None, None])
        for m in r.mix:
            rows.append(base + [m.t, m.rho_mix, m.ece_mix, m.mce_mix])
    return _csv_text(TRIAL_CSV_COLUMNS, rows)


def render_report(obj, fmt: str) -> str:
    """Text of a trial table, verdict or sweep table in ``csv`` or ``json``."""
    if fmt not in ("csv", "json"):
        raise InvalidParameterError(f"format must be csv or json, got {fmt!r}")
    if isinstance(obj, Verdict):
        if fmt == "json":
            return dumps_json(obj.to_dict())
        d = obj.to_dict()
        d["gap_ci95_lo"], d["gap_ci95_hi"] = d.pop("gap_ci95")
        d["regime_notes"] = "; ".join(d["regime_notes"])
        return _csv_text(list(d), [list(d.values())])
    items = list(obj)
    if all(isinstance(x, SweepRow) for x in items) and items:
        if fmt == "json":
            return dumps_json([asdict(x) for x in items])
        names = [f.name for f in fields(SweepRow)]
        return _csv_text(names, [[getattr(x, n) for n in names] for x in items])
    if not all(isinstance(x, TrialRecord) for x in items):
        raise InvalidParameterError("expected a Verdict, SweepRows or TrialRecords")
    if fmt == "json":
        return dumps_json([r.to_dict() for r in items])
    return trial_table_csv(items)


def emit_report(obj, path, fmt: str = "json") -> Path:
    """Write ``obj`` to ``path``; I/O errors name the path."""
    text = render_report(obj, fmt)
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc
    return path


def load_verdict(path) -> Verdict:
    return Verdict.from_dict(json.loads(Path(path).read_text()))


def compare_sigma_pipelines(p: int, n: int, sigma: float, theta_norm: float, rng_seed: int, stream: int = 0,
                            quad: QuadratureSpec = DEFAULT_QUAD) -> dict:
    """Known-sigma versus estimated-sigma pipelines on one dataset.

    The estimated pipeline fits on ``x / sigma_hat``, so its logit is
    ``2 theta_hat_raw^T x / sigma_hat^2``.  On the true unit-noise scale that
    is the known-sigma weight vector times ``(sigma / sigma_hat)^2``, and
    its exact ECE follows from :func:`analytic_ece`.
    """
    from .estimators import estimate_sigma
    from .model import FeatureMap, apply_feature_map

    rng = make_rng(rng_seed, stream)
    raw = ModelParams.canonical(p, theta_norm, sigma)
    data = sample_dataset(raw, n, rng)
    sigma_hat = estimate_sigma(data, fisher_estimator(data).theta_hat)

    unit_data, unit = normalize_unit_sigma(data, raw)
    known = fisher_estimator(unit_data).theta_hat
    ece_known = analytic_ece(known, unit.theta, quad)

    scaled = apply_feature_map(data, FeatureMap.scale(1.0 / sigma_hat))
    est = fisher_estimator(scaled).theta_hat
    effective = est * (sigma / sigma_hat)
    ece_est = analytic_ece(effective, unit.theta, quad)
    return {"sigma_hat": sigma_hat, "ece_known": ece_known, "ece_estimated": ece_est}
