"""Fast marginal maximum likelihood estimation for Bayesian ridge models."""

from .core import (
    MmlFit,
    RidgeSpec,
    ShrinkageProfile,
    estimate_grr,
    estimate_prr,
    estimate_rr,
    fit_mml,
    lambda_vector,
    log_marginal,
)
from .data import Dataset, StandardizedDesign, prepare_design, read_csv
from .estimators import BayesianRidgeClassifierMML, BayesianRidgeMML
from .posterior import PosteriorSummary, posterior_fit, predictive, significance

__all__ = [
    "BayesianRidgeClassifierMML",
    "BayesianRidgeMML",
    "Dataset",
    "MmlFit",
    "PosteriorSummary",
    "RidgeSpec",
    "ShrinkageProfile",
    "StandardizedDesign",
    "estimate_grr",
    "estimate_prr",
    "estimate_rr",
    "fit_mml",
    "lambda_vector",
    "log_marginal",
    "posterior_fit",
    "predictive",
    "prepare_design",
    "read_csv",
    "significance",
]

__version__ = "0.1.0"
