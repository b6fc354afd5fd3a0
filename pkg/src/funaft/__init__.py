"""Penalized accelerated failure time models with functional covariates.

``fit_lfaft`` fits the linear functional model, where a curve enters through
``int X(s) beta(s) ds``. ``fit_afaft`` fits the additive model, where it
enters through ``int F(s, X(s)) ds`` with ``F`` a tensor-product spline.
Both use B-spline bases with difference penalties, a hand-written BFGS, and
GCV over a logarithmic grid of smoothing parameters.
"""

from .basis import SplineBasis, TensorBasis, basis_matrix, make_bspline_basis, make_penalty
from .dataset import DatasetError, Subject, SurvivalDataset, load_dataset, normalize_domain, write_dataset
from .design import DesignError, DesignMatrix, build_additive_design, build_linear_design
from .fitter import FitError, FittedModel, effective_df, fit_afaft, fit_lfaft, select_lambda
from .likelihood import Family, ParamVector, gradient, hessian, penalized_loglik
from .metrics import MetricWindow, brier, mise
from .optimize import OptimizerSettings, bfgs_maximize
from .predict import (
    InferenceError,
    bootstrap_ci,
    coef_curve,
    coef_surface,
    predict_survival,
    survival_matrix,
    wald_ci,
)
from .simulate import Dgp, FpcGenerator, SimulationConfig, gen_functional, run_study, simulate_dgp

__version__ = "0.1.0"

__all__ = [
    "DatasetError",
    "DesignError",
    "DesignMatrix",
    "Dgp",
    "Family",
    "FitError",
    "FittedModel",
    "FpcGenerator",
    "InferenceError",
    "MetricWindow",
    "OptimizerSettings",
    "ParamVector",
    "SimulationConfig",
    "SplineBasis",
    "Subject",
    "SurvivalDataset",
    "TensorBasis",
    "basis_matrix",
    "bfgs_maximize",
    "bootstrap_ci",
    "brier",
    "build_additive_design",
    "build_linear_design",
    "coef_curve",
    "coef_surface",
    "effective_df",
    "fit_afaft",
    "fit_lfaft",
    "gen_functional",
    "gradient",
    "hessian",
    "load_dataset",
    "make_bspline_basis",
    "make_penalty",
    "mise",
    "normalize_domain",
    "penalized_loglik",
    "predict_survival",
    "run_study",
    "select_lambda",
    "simulate_dgp",
    "survival_matrix",
    "wald_ci",
    "write_dataset",
]
