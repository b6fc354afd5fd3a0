"""Log-normal and log-logistic AFT likelihoods with a difference penalty.

Every family is written in terms of the standardized residual
``z = (log t - eta) / sigma``; derivatives with respect to ``eta`` and
``log sigma`` follow from ``dz/deta = -1/sigma`` and ``dz/dlog sigma = -z``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, expit, log_ndtr

from .dataset import SurvivalDataset
from .design import DesignMatrix

log = logging.getLogger(__name__)

_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)
_SQRT2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class Family(str, enum.Enum):
    LOG_NORMAL = "log_normal"
    LOG_LOGISTIC = "log_logistic"

    @classmethod
    def parse(cls, name) -> "Family":
        if isinstance(name, cls):
            return name
        key = str(name).lower().replace("-", "").replace("_", "")
        for fam in cls:
            if fam.value.replace("_", "") == key:
                return fam
        raise ValueError(f"unknown family {name!r}; expected lognormal or loglogistic")

    @property
    def short(self) -> str:
        return self.value.replace("_", "")


@dataclass(frozen=True, eq=False)
class ParamVector:
    gamma: np.ndarray
    b: np.ndarray
    log_sigma: float

    @property
    def sigma(self) -> float:
        return math.exp(self.log_sigma)

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.gamma, self.b, [self.log_sigma]])

    @classmethod
    def from_array(cls, theta, n_scalar: int) -> "ParamVector":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:n_scalar].copy(), theta[n_scalar:-1].copy(), float(theta[-1]))


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("survival times must be positive")
    return t


def _softplus(z):
    return np.logaddexp(0.0, z)


def _terms(family: Family, logt, delta, z, log_sigma):
    """Per-subject log-likelihood contributions and d/dz, d2/dz2 of each."""
    if family is Family.LOG_NORMAL:
        # extreme trial points overflow to -inf, which callers treat as infeasible
        with np.errstate(over="ignore", invalid="ignore"):
            log_surv = log_ndtr(-z)
            # inverse Mills ratio phi(z) / (1 - Phi(z)), via erfcx to avoid cancellation
            mills = _SQRT_2_OVER_PI / erfcx(z / _SQRT2)
            ll = np.where(delta, -logt - log_sigma - _HALF_LOG_2PI - 0.5 * z * z, log_surv)
            dz = np.where(delta, -z, -mills)
            # mills * (mills - z) cancels for large z; use its asymptotic series there
            zi2 = 1.0 / np.maximum(z, 1e3) ** 2
            curv = np.where(z > 1e3, 1.0 - 2.0 * zi2 + 10.0 * zi2 * zi2, mills * (mills - z))
            dzz = np.where(delta, -1.0, -curv)
    else:
        sp = _softplus(z)
        p = expit(z)
        ll = np.where(delta, -log_sigma - logt + z - 2.0 * sp, -sp)
        dz = np.where(delta, 1.0 - 2.0 * p, -p)
        dzz = np.where(delta, -2.0 * p * (1.0 - p), -p * (1.0 - p))
    return ll, dz, dzz


def log_density(family, t, eta, sigma):
    """Log density of the event time ``t`` given linear predictor ``eta`` and scale ``sigma``."""
    family = Family.parse(family)
    logt = np.log(_check_t(t))
    z = (logt - eta) / sigma
    ll, _, _ = _terms(family, logt, True, z, math.log(sigma) if np.isscalar(sigma) else np.log(sigma))
    return ll[()] if np.ndim(ll) == 0 else ll


def log_survival(family, t, eta, sigma):
    family = Family.parse(family)
    logt = np.log(_check_t(t))
    z = (logt - eta) / sigma
    if family is Family.LOG_NORMAL:
        out = log_ndtr(-z)
    else:
        out = -_softplus(z)
    return out[()] if np.ndim(out) == 0 else out


def survival(family, t, eta, sigma):
    """``S(t)`` with ``S(0) = 1``; broadcasts over ``t`` and ``eta``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be nonnegative")
    safe = np.where(t > 0, t, 1.0)
    out = np.exp(log_survival(family, safe, eta, sigma))
    return np.where(t > 0, out, 1.0)


class PenalizedProblem:
    """Penalized AFT log-likelihood over ``theta = (gamma, b, log sigma)``."""

    def __init__(self, design: DesignMatrix, times, events, family, lam: float):
        self.X = design.full
        self.D = design.penalty
        self.n_scalar = design.n_scalar
        self.logt = np.log(_check_t(times))
        self.delta = np.asarray(events, dtype=bool)
        self.family = Family.parse(family)
        if lam < 0:
            raise ValueError("smoothing parameter must be nonnegative")
        self.lam = float(lam)
        self.n_events = int(self.delta.sum())

    @classmethod
    def from_data(cls, design: DesignMatrix, data: SurvivalDataset, family, lam: float):
        return cls(design, data.times, data.events, family, lam)

    @property
    def dim(self) -> int:
        return self.X.shape[1] + 1

    def _split(self, theta):
        return theta[:-1], theta[-1]

    def eta(self, theta) -> np.ndarray:
        return self.X @ theta[:-1]

    def penalty(self, theta) -> float:
        coef = theta[:-1]
        return float(coef @ self.D @ coef)

    def loglik(self, theta, penalized: bool = True) -> float:
        coef, log_sigma = self._split(np.asarray(theta, dtype=float))
        eta = self.X @ coef
        if not np.all(np.isfinite(eta)) or not math.isfinite(log_sigma):
            return -math.inf
        with np.errstate(over="ignore", invalid="ignore"):
            z = (self.logt - eta) / math.exp(log_sigma)
        ll, _, _ = _terms(self.family, self.logt, self.delta, z, log_sigma)
        val = math.fsum(ll)
        if penalized:
            val -= self.lam * float(coef @ self.D @ coef)
        return val if math.isfinite(val) else -math.inf

    def value_and_grad(self, theta):
        coef, log_sigma = self._split(np.asarray(theta, dtype=float))
        eta = self.X @ coef
        if not np.all(np.isfinite(eta)) or not math.isfinite(log_sigma) or abs(log_sigma) > 700:
            return -math.inf, np.full(self.dim, np.nan)
        sigma = math.exp(log_sigma)
        with np.errstate(over="ignore", invalid="ignore"):
            z = (self.logt - eta) / sigma
        ll, dz, _ = _terms(self.family, self.logt, self.delta, z, log_sigma)
        Dc = self.D @ coef
        val = math.fsum(ll) - self.lam * float(coef @ Dc)
        if not math.isfinite(val):
            return -math.inf, np.full(self.dim, np.nan)
        g = np.empty(self.dim)
        g[:-1] = self.X.T @ (-dz / sigma) - 2.0 * self.lam * Dc
        g[-1] = -self.n_events - float(z @ dz)
        return val, g

    def grad(self, theta) -> np.ndarray:
        return self.value_and_grad(theta)[1]

    def eta_curvature(self, theta) -> np.ndarray:
        """``w_i = -d2 l_i / d eta_i^2`` at ``theta`` (events and censored alike)."""
        coef, log_sigma = self._split(np.asarray(theta, dtype=float))
        sigma = math.exp(log_sigma)
        z = (self.logt - self.X @ coef) / sigma
        _, _, dzz = _terms(self.family, self.logt, self.delta, z, log_sigma)
        return -dzz / sigma**2

    def hessian(self, theta) -> np.ndarray:
        """Central differences of the analytic gradient, symmetrized."""
        theta = np.asarray(theta, dtype=float)
        H = np.empty((self.dim, self.dim))
        for j in range(self.dim):
            h = 1e-5 * max(1.0, abs(theta[j]))
            tp = theta.copy()
            tm = theta.copy()
            tp[j] += h
            tm[j] -= h
            H[:, j] = (self.grad(tp) - self.grad(tm)) / (2 * h)
        return 0.5 * (H + H.T)


def penalized_loglik(design: DesignMatrix, data: SurvivalDataset, params: ParamVector, family, lam: float) -> float:
    return PenalizedProblem.from_data(design, data, family, lam).loglik(params.to_array())


def gradient(design: DesignMatrix, data: SurvivalDataset, params: ParamVector, family, lam: float) -> np.ndarray:
    return PenalizedProblem.from_data(design, data, family, lam).grad(params.to_array())


def hessian(design: DesignMatrix, data: SurvivalDataset, params: ParamVector, family, lam: float) -> np.ndarray:
    return PenalizedProblem.from_data(design, data, family, lam).hessian(params.to_array())
