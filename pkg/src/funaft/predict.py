"""Coefficient reconstruction, survival prediction and interval estimation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.integrate import trapezoid
from scipy.stats import norm
from threadpoolctl import threadpool_limits

from .basis import basis_matrix
from .dataset import Subject, SurvivalDataset
from .fitter import FittedModel, design_for, prepare_new_data
from .likelihood import PenalizedProblem, survival
from .optimize import bfgs_maximize

log = logging.getLogger(__name__)


class InferenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CoefficientCurve:
    s_grid: np.ndarray
    beta_hat: np.ndarray
    lower95: np.ndarray | None = None
    upper95: np.ndarray | None = None
    integral: float = 0.0
    # scalar parameter intervals: name -> (estimate, lower, upper)
    intervals: dict = field(default_factory=dict)
    method: str = "point"

    @property
    def exp_integral(self) -> float:
        """Multiplicative change in survival time per unit shift of the whole curve."""
        return math.exp(self.integral)


@dataclass(frozen=True, eq=False)
class CoefficientSurface:
    s_grid: np.ndarray
    x_grid: np.ndarray
    F_hat: np.ndarray
    intercept: float = 0.0


@dataclass(frozen=True, eq=False)
class SurvivalCurve:
    id: str
    t_grid: np.ndarray
    s_hat: np.ndarray


def _require(model: FittedModel, kind: str):
    if model.model != kind:
        raise TypeError(f"operation needs a {kind} model, got {model.model}")


def _scale(model: FittedModel) -> tuple[float, float, float]:
    dmap = model.domain_map
    if dmap is None:
        return 0.0, 1.0, 1.0
    return dmap.lo, dmap.hi, dmap.hi - dmap.lo


def _beta_on_grid(model: FittedModel, b, n_points: int):
    lo, hi, width = _scale(model)
    u = np.linspace(0.0, 1.0, n_points)
    B = basis_matrix(model.s_basis, u)
    beta_unit = B @ np.asarray(b).T
    # per-unit-of-s on the original scale so that int beta ds is unchanged
    return lo + width * u, beta_unit / width, u, B


def coef_curve(model: FittedModel, n_points: int = 101) -> CoefficientCurve:
    """``beta_hat(s)`` on an even grid of the original functional domain."""
    _require(model, "lfaft")
    s, beta, u, _ = _beta_on_grid(model, model.params.b, n_points)
    integral = float(trapezoid(beta, s))
    return CoefficientCurve(s, beta, integral=integral)


def _surface_raw(model: FittedModel, u, x):
    Bs = basis_matrix(model.s_basis, u)
    Bx = basis_matrix(model.x_basis, x)
    bmat = model.params.b.reshape(model.s_basis.num_basis, model.x_basis.num_basis)
    return Bs @ bmat @ Bx.T


def _surface_offset(model: FittedModel, u) -> np.ndarray:
    """Empirical mean of the raw surface along the training curves at each ``u``."""
    g, M = model.x_marginal
    Mi = np.column_stack([np.interp(u, g, M[:, k]) for k in range(M.shape[1])])
    Bs = basis_matrix(model.s_basis, u)
    bmat = model.params.b.reshape(model.s_basis.num_basis, model.x_basis.num_basis)
    return np.einsum("ij,jk,ik->i", Bs, bmat, Mi)


def coef_surface(model: FittedModel, n_s: int = 51, n_x: int = 51, x_grid=None) -> CoefficientSurface:
    """``F_hat(s, x)`` shifted to have mean zero along the training curves at every ``s``."""
    _require(model, "afaft")
    lo, hi, width = _scale(model)
    u = np.linspace(0.0, 1.0, n_s)
    if x_grid is None:
        x_grid = np.linspace(*model.x_basis.domain, n_x)
    x_grid = np.asarray(x_grid, dtype=float)
    F = _surface_raw(model, u, x_grid) - _surface_offset(model, u)[:, None]
    return CoefficientSurface(lo + width * u, x_grid, F / width, float(model.params.gamma[0]))


def surface_at(model: FittedModel, s, x) -> np.ndarray:
    """Centered ``F_hat`` at paired points ``(s_m, x_m)`` given on the original scale."""
    _require(model, "afaft")
    lo, hi, width = _scale(model)
    u = (np.asarray(s, dtype=float) - lo) / width
    Bs = basis_matrix(model.s_basis, u)
    Bx = basis_matrix(model.x_basis, x)
    bmat = model.params.b.reshape(model.s_basis.num_basis, model.x_basis.num_basis)
    raw = np.einsum("ij,jk,ik->i", Bs, bmat, Bx)
    return (raw - _surface_offset(model, u)) / width


def linear_predictor(model: FittedModel, data: SurvivalDataset, clamp_x: bool = False) -> np.ndarray:
    prepared = prepare_new_data(model, data)
    design = design_for(model, prepared, clamp_x)
    return design.full @ np.concatenate([model.params.gamma, model.params.b])


def survival_matrix(model: FittedModel, data: SurvivalDataset, t_grid, clamp_x: bool = False) -> np.ndarray:
    """Predicted ``S_i(t)`` for every subject (rows) and time (columns)."""
    eta = linear_predictor(model, data, clamp_x)
    t = np.asarray(t_grid, dtype=float)
    return survival(model.family, t[None, :], eta[:, None], model.params.sigma)


def predict_survival(model: FittedModel, subject: Subject, t_grid, clamp_x: bool = False) -> SurvivalCurve:
    t = np.asarray(t_grid, dtype=float)
    if np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be nonnegative and strictly increasing")
    data = SurvivalDataset((subject,), model.scalar_names)
    S = survival_matrix(model, data, t, clamp_x)[0]
    return SurvivalCurve(subject.id, t, S)


def _interval_table(est, draws=None, se=None, names=()):
    out = {}
    for j, name in enumerate(names):
        if draws is not None:
            lo, hi = np.percentile(draws[:, j], [2.5, 97.5])
        else:
            z = norm.ppf(0.975)
            lo, hi = est[j] - z * se[j], est[j] + z * se[j]
        out[name] = (float(est[j]), float(lo), float(hi))
    return out


def _gamma_names(model: FittedModel):
    return ["intercept", *model.scalar_names]


def wald_ci(model: FittedModel, data: SurvivalDataset, n_points: int = 101) -> CoefficientCurve:
    """Pointwise 95% Wald intervals conditional on the selected smoothing parameter.

    Covariance is the inverse negative Hessian of the penalized log-likelihood;
    the scale interval is built on the log scale and exponentiated.
    """
    _require(model, "lfaft")
    prepared = prepare_new_data(model, data)
    design = design_for(model, prepared)
    problem = PenalizedProblem.from_data(design, prepared, model.family, model.lam)
    theta = model.theta()
    H = problem.hessian(theta)
    try:
        L = np.linalg.cholesky(-H)
    except np.linalg.LinAlgError:
        raise InferenceError(
            "penalized Hessian is not negative definite at the estimate; use bootstrap_ci instead"
        ) from None
    cov = np.linalg.solve(L.T, np.linalg.solve(L, np.eye(H.shape[0])))
    cov = 0.5 * (cov + cov.T)
    ng = design.n_scalar
    kb = design.n_functional
    s, beta, _, B = _beta_on_grid(model, model.params.b, n_points)
    _, _, width = _scale(model)
    cov_b = cov[ng : ng + kb, ng : ng + kb]
    var = np.einsum("ij,jk,ik->i", B, cov_b, B) / width**2
    se = np.sqrt(np.maximum(var, 0.0))
    z = norm.ppf(0.975)
    se_all = np.sqrt(np.maximum(np.diag(cov), 0.0))
    intervals = _interval_table(model.params.gamma, se=se_all[:ng], names=_gamma_names(model))
    ls, ls_se = model.params.log_sigma, se_all[-1]
    intervals["sigma"] = (math.exp(ls), math.exp(ls - z * ls_se), math.exp(ls + z * ls_se))
    return CoefficientCurve(
        s, beta, beta - z * se, beta + z * se, float(trapezoid(beta, s)), intervals, "wald"
    )


def _bootstrap_task(X, D, logt_times, events, family, lam, theta0, n_scalar, seeds):
    out = []
    n = X.shape[0]
    with threadpool_limits(1):
        for ss in seeds:
            rng = np.random.default_rng(ss)
            redraws = 0
            while True:
                idx = rng.integers(0, n, n)
                if events[idx].any():
                    break
                redraws += 1
            design = _RowDesign(X[idx], D, n_scalar)
            problem = PenalizedProblem(design, logt_times[idx], events[idx], family, lam)
            res = bfgs_maximize(problem.value_and_grad, theta0)
            out.append((res.x, res.converged, redraws))
    return out


@dataclass(frozen=True, eq=False)
class _RowDesign:
    """Minimal design stand-in for resampled rows."""

    full: np.ndarray
    penalty: np.ndarray
    n_scalar: int


def bootstrap_draws(model: FittedModel, data: SurvivalDataset, B: int = 2000, seed: int = 0, jobs: int = 1):
    """Refit on ``B`` subject-level resamples at the model's fixed smoothing parameter.

    Returns the ``B x dim`` array of parameter draws in resample order.
    """
    if B < 50:
        raise ValueError("bootstrap needs B >= 50 resamples")
    prepared = prepare_new_data(model, data)
    design = design_for(model, prepared)
    X = design.full
    seeds = np.random.SeedSequence(seed).spawn(B)
    jobs = max(1, int(jobs))
    chunks = [seeds[i::jobs] for i in range(jobs)] if jobs > 1 else [seeds]
    args = (X, design.penalty, prepared.times, prepared.events, model.family, model.lam, model.theta(), design.n_scalar)
    if jobs == 1:
        results = [_bootstrap_task(*args, chunks[0])]
    else:
        results = Parallel(n_jobs=jobs)(delayed(_bootstrap_task)(*args, c) for c in chunks)
    ordered = [None] * B
    for j, chunk in enumerate(results):
        for i, item in enumerate(chunk):
            ordered[j + i * jobs if jobs > 1 else i] = item
    draws = np.vstack([r[0] for r in ordered])
    n_failed = sum(not r[1] for r in ordered)
    n_redraw = sum(r[2] for r in ordered)
    if n_redraw:
        log.info("redrew %d bootstrap resample(s) with no events", n_redraw)
    if n_failed:
        log.warning("%d of %d bootstrap refits did not converge", n_failed, B)
    return draws


def bootstrap_ci(
    model: FittedModel, data: SurvivalDataset, B: int = 2000, seed: int = 0, jobs: int = 1, n_points: int = 101
) -> CoefficientCurve:
    """Percentile 95% bootstrap intervals for ``beta(s)``, gamma and sigma."""
    _require(model, "lfaft")
    draws = bootstrap_draws(model, data, B, seed, jobs)
    ng = model.params.gamma.size
    kb = model.params.b.size
    s, beta, _, _ = _beta_on_grid(model, model.params.b, n_points)
    _, beta_draws, _, _ = _beta_on_grid(model, draws[:, ng : ng + kb], n_points)
    lo, hi = np.percentile(beta_draws, [2.5, 97.5], axis=1)
    intervals = _interval_table(model.params.gamma, draws=draws[:, :ng], names=_gamma_names(model))
    sig = np.exp(draws[:, -1])
    slo, shi = np.percentile(sig, [2.5, 97.5])
    intervals["sigma"] = (model.params.sigma, float(slo), float(shi))
    return CoefficientCurve(
        s, beta, lo, hi, float(trapezoid(beta, s)), intervals, f"percentile bootstrap (B={B})"
    )
