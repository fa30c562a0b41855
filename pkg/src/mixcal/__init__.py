"""Calibration of Mixup-trained linear classifiers under a two-class Gaussian model."""

from .analytic import (
    Alignment,
    MceSolution,
    alignment,
    analytic_ece,
    analytic_ece_shrunk,
    analytic_mce,
    ece_derivative_at_zero,
    mce_derivative_at_zero,
)
from .empirical import BinSpec, ReliabilityReport, ScoredSamples, binned_calibration, confidence_scores
from .errors import (
    DegenerateClassifierError,
    DimensionError,
    InvalidParameterError,
    MixcalError,
    NumericalFailure,
)
from .estimators import (
    BetaMixLaw,
    fisher_estimator,
    mixup_estimator_closed,
    mixup_estimator_mc,
    semi_supervised_estimator,
    shrink_coefficient,
)
from .experiments import TrialConfig, Verdict, check_theorem, run_trial, run_trials, sweep_ratio
from .model import Dataset, ModelParams, sample_dataset
from .numerics import DEFAULT_QUAD, QuadratureSpec, RngState, make_rng

__version__ = "0.1.0"
