"""BFGS with a strong-Wolfe line search.

Works on a maximization problem ``fun(x) -> (value, gradient)`` by minimizing
its negation internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class OptimizerError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerSettings:
    max_iter: int = 500
    grad_tol: float = 1e-6
    rel_f_tol: float = 1e-8
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_ls_evals: int = 40

    def __post_init__(self):
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ValueError("Wolfe constants must satisfy 0 < c1 < c2 < 1")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")


@dataclass
class OptimizeResult:
    x: np.ndarray
    value: float
    grad: np.ndarray
    n_iter: int
    converged: bool
    message: str
    n_evals: int = 0
    history: list = field(default_factory=list)


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), or None."""
    d1 = da + db - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = db - da + 2 * d2
    if denom == 0:
        return None
    return b - (b - a) * (db + d2 - d1) / denom


class _Line:
    def __init__(self, fun, x, p):
        self.fun = fun
        self.x = x
        self.p = p
        self.evals = 0
        self.cache = {}

    def __call__(self, alpha):
        if alpha not in self.cache:
            self.evals += 1
            f, g = self.fun(self.x + alpha * self.p)
            d = float(g @ self.p) if math.isfinite(f) and np.all(np.isfinite(g)) else math.nan
            if not math.isfinite(d):
                f = math.inf
            self.cache[alpha] = (f, g, d)
        return self.cache[alpha]


def wolfe_line_search(fun, x, p, f0, g0, alpha0=1.0, c1=1e-4, c2=0.9, max_evals=40):
    """Strong-Wolfe step along ``p`` for a minimization problem.

    Expands (or backtracks on non-finite values) until the minimum is
    bracketed, then zooms with safeguarded cubic interpolation.
    Returns ``(alpha, f, g, n_evals)`` or ``None`` when no acceptable step exists.
    """
    line = _Line(fun, x, p)
    d0 = float(g0 @ p)
    if d0 >= 0:
        return None

    def zoom(lo, hi):
        flo, _, dlo = line(lo)
        for _ in range(max_evals):
            fhi, _, dhi = line(hi)
            a = None
            if math.isfinite(fhi):
                a = _cubic_min(lo, flo, dlo, hi, fhi, dhi)
            left, right = min(lo, hi), max(lo, hi)
            width = right - left
            if a is None or not (left + 0.1 * width <= a <= right - 0.1 * width):
                a = 0.5 * (lo + hi)
            fa, ga, da = line(a)
            if fa > f0 + c1 * a * d0 or fa >= flo:
                hi = a
            else:
                if abs(da) <= -c2 * d0:
                    return a, fa, ga
                if da * (hi - lo) >= 0:
                    hi = lo
                lo, flo, dlo = a, fa, da
            if abs(hi - lo) <= 1e-16 * max(1.0, abs(lo)) or line.evals >= max_evals:
                break
        # accept the best sufficient-decrease point found so far
        if lo > 0:
            flo, glo, _ = line(lo)
            return lo, flo, glo
        return None

    prev, fprev = 0.0, f0
    alpha = alpha0
    for i in range(max_evals):
        fa, ga, da = line(alpha)
        if not math.isfinite(fa):
            # overflow region: shrink rather than bracket
            alpha = 0.5 * (prev + alpha) if prev > 0 else 0.25 * alpha
            if alpha < 1e-20:
                return None
            continue
        if fa > f0 + c1 * alpha * d0 or (i > 0 and fa >= fprev):
            res = zoom(prev, alpha)
            break
        if abs(da) <= -c2 * d0:
            res = (alpha, fa, ga)
            break
        if da >= 0:
            res = zoom(alpha, prev)
            break
        prev, fprev = alpha, fa
        alpha *= 2.0
        if line.evals >= max_evals:
            res = (prev, fprev, line(prev)[1])
            break
    else:
        res = None
    if res is None:
        return None
    a, fa, ga = res
    return a, fa, ga, line.evals


def bfgs_maximize(fun, x0, settings: OptimizerSettings | None = None) -> OptimizeResult:
    """Maximize ``fun`` (returning ``(value, gradient)``) from ``x0`` by BFGS.

    Stops on ``max|grad| < grad_tol``, a relative objective change below
    ``rel_f_tol``, or ``max_iter``. A failed line search returns the best
    point with ``converged=False``.
    """
    st = settings or OptimizerSettings()

    def neg(x):
        v, g = fun(x)
        return -v, -np.asarray(g, dtype=float)

    x = np.array(x0, dtype=float)
    f, g = neg(x)
    n_evals = 1
    if not (math.isfinite(f) and np.all(np.isfinite(g))):
        raise OptimizerError("objective or gradient is not finite at the starting point")
    n = x.size
    H = np.eye(n)
    scaled = False
    history = [-f]

    def done(k, ok, msg):
        return OptimizeResult(x, -f, -g, k, ok, msg, n_evals, history)

    for k in range(st.max_iter):
        if np.max(np.abs(g), initial=0.0) < st.grad_tol:
            return done(k, True, "gradient tolerance reached")
        p = -H @ g
        if not g @ p < 0:
            H = np.eye(n)
            scaled = False
            p = -g
        alpha0 = 1.0 if scaled else min(1.0, 1.0 / max(np.max(np.abs(g)), 1e-300))
        ls = wolfe_line_search(neg, x, p, f, g, alpha0, st.wolfe_c1, st.wolfe_c2, st.max_ls_evals)
        if ls is None and scaled:
            # retry once from steepest descent
            H = np.eye(n)
            scaled = False
            p = -g
            alpha0 = min(1.0, 1.0 / max(np.max(np.abs(g)), 1e-300))
            ls = wolfe_line_search(neg, x, p, f, g, alpha0, st.wolfe_c1, st.wolfe_c2, st.max_ls_evals)
        if ls is None:
            return done(k, False, "line search failed")
        alpha, f_new, g_new, evals = ls
        n_evals += evals
        s = alpha * p
        y = g_new - g
        f_old = f
        x = x + s
        f, g = f_new, g_new
        history.append(-f)
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if not scaled:
                H = np.eye(n) * (sy / float(y @ y))
                scaled = True
            rho = 1.0 / sy
            Hy = H @ y
            H = H + (rho + rho * rho * float(y @ Hy)) * np.outer(s, s) - rho * (np.outer(Hy, s) + np.outer(s, Hy))
        if abs(f_old - f) <= st.rel_f_tol * max(abs(f_old), abs(f), 1.0):
            return done(k + 1, True, "relative objective change below tolerance")
    converged = np.max(np.abs(g), initial=0.0) < st.grad_tol
    return done(st.max_iter, bool(converged), "maximum iterations reached")
