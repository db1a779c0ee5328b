"""Iterative isotonic regression: bounded-variation regression by backfitting
an isotone and an antitone component."""

from .backfit import IirModel, decomposition_report, fit, iir_step, initial_model, residual_sup_norm
from .estimator import IterativeIsotonicRegressor
from .isotonic import MonotoneFit, SortedSample, anti, collapse_ties, iso, iso_minmax_oracle
from .select import StopRule, criterion_value, select_k_holdout, select_k_penalized
from .stepfn import StepFunction, extend, jump_count, l2_distance

__version__ = "0.1.0"

__all__ = [
    "IirModel",
    "IterativeIsotonicRegressor",
    "MonotoneFit",
    "SortedSample",
    "StepFunction",
    "StopRule",
    "anti",
    "collapse_ties",
    "criterion_value",
    "decomposition_report",
    "extend",
    "fit",
    "iir_step",
    "initial_model",
    "iso",
    "iso_minmax_oracle",
    "jump_count",
    "l2_distance",
    "residual_sup_norm",
    "select_k_holdout",
    "select_k_penalized",
]
