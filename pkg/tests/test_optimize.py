import numpy as np
import pytest
from scipy.optimize import rosen, rosen_der

from funaft.optimize import OptimizerError, OptimizerSettings, bfgs_maximize, wolfe_line_search


def _neg_rosen(x):
    return -rosen(x), -rosen_der(x)


def test_concave_quadratic():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(6, 6))
    A = M @ M.T + 6 * np.eye(6)
    c = rng.normal(size=6)
    fun = lambda x: (-0.5 * x @ A @ x + c @ x, -A @ x + c)  # noqa: E731
    res = bfgs_maximize(fun, np.zeros(6), OptimizerSettings(grad_tol=1e-10, rel_f_tol=0.0))
    assert res.converged
    np.testing.assert_allclose(res.x, np.linalg.solve(A, c), atol=1e-8)


def test_rosenbrock_from_standard_start():
    res = bfgs_maximize(_neg_rosen, [-1.2, 1.0], OptimizerSettings(grad_tol=1e-9, rel_f_tol=0.0))
    assert res.converged
    assert np.max(np.abs(res.x - 1.0)) < 1e-5


def test_start_at_optimum_returns_immediately():
    res = bfgs_maximize(_neg_rosen, [1.0, 1.0])
    assert res.converged and res.n_iter == 0
    np.testing.assert_array_equal(res.x, [1.0, 1.0])


def test_non_finite_start_raises():
    with pytest.raises(OptimizerError):
        bfgs_maximize(lambda x: (np.nan, np.zeros_like(x)), [0.0])
    with pytest.raises(OptimizerError):
        bfgs_maximize(lambda x: (0.0, np.array([np.inf])), [0.0])


def test_history_is_nondecreasing():
    res = bfgs_maximize(_neg_rosen, [-1.2, 1.0])
    h = np.array(res.history)
    assert h.size == res.n_iter + 1
    assert np.all(np.diff(h) >= 0)
    assert res.value == h[-1]


def test_max_iter_reports_non_convergence():
    res = bfgs_maximize(_neg_rosen, [-1.2, 1.0], OptimizerSettings(max_iter=3))
    assert not res.converged
    assert res.n_iter == 3


def test_infeasible_region_is_avoided():
    # log barrier: -inf outside x > 0 must be rejected by the line search
    def fun(x):
        if x[0] <= 0:
            return -np.inf, np.array([np.nan])
        return np.log(x[0]) - x[0], np.array([1 / x[0] - 1])

    res = bfgs_maximize(fun, [5.0])
    assert res.converged
    assert res.x[0] == pytest.approx(1.0, abs=1e-5)


def test_line_search_satisfies_strong_wolfe():
    f = lambda x: (float(rosen(x)), rosen_der(x))  # noqa: E731
    x = np.array([-1.2, 1.0])
    f0, g0 = f(x)
    p = -g0
    alpha, f1, g1, _ = wolfe_line_search(f, x, p, f0, g0, 1e-3, 1e-4, 0.9)
    assert f1 <= f0 + 1e-4 * alpha * (g0 @ p)
    assert abs(g1 @ p) <= 0.9 * abs(g0 @ p)


def test_bad_settings():
    with pytest.raises(ValueError):
        OptimizerSettings(wolfe_c1=0.9, wolfe_c2=0.1)
    with pytest.raises(ValueError):
        OptimizerSettings(max_iter=-1)
