import json
import math

import numpy as np
import pytest

from funaft.basis import BasisConfigError, make_bspline_basis
from funaft.dataset import Subject, SurvivalDataset
from funaft.design import build_linear_design
from funaft.fitter import (
    FitError,
    FittedModel,
    effective_df,
    fit_afaft,
    fit_at_lambda,
    fit_lfaft,
    gcv_value,
    lambda_grid,
    penalty_factor,
    select_lambda,
    trace_smoother,
)
from funaft.likelihood import ParamVector, PenalizedProblem
from funaft.predict import coef_curve

from conftest import make_dataset
from oracles import df_dense_inverse


@pytest.fixture(scope="module")
def small_design():
    data = make_dataset(n=40, p=20, scalars=1, seed=3)
    design = build_linear_design(data, make_bspline_basis(K=8))
    return data, design


def test_df_matches_dense_inverse(small_design):
    data, design = small_design
    theta, prob, _ = fit_at_lambda(design, data, "log_normal", 5.0)
    w = prob.eta_curvature(theta)
    params = ParamVector.from_array(theta, design.n_scalar)
    ours = effective_df(design, data, params, "log_normal", 5.0)
    assert ours == pytest.approx(df_dense_inverse(design.full, w, design.penalty, 5.0), abs=1e-8)


def test_df_limits():
    # rough curves so the functional block has full column rank
    rng = np.random.default_rng(2)
    grid = np.linspace(0, 1, 20)
    subs = [Subject(str(i), float(np.exp(rng.normal())), i % 4 != 0, [rng.normal()], grid, rng.normal(size=20)) for i in range(40)]
    data = SurvivalDataset(subs, ("z",))
    design = build_linear_design(data, make_bspline_basis(K=8))
    theta, _, _ = fit_at_lambda(design, data, "log_normal", 1.0)
    params = ParamVector.from_array(theta, design.n_scalar)
    total = design.full.shape[1]
    assert effective_df(design, data, params, "log_normal", 0.0) == pytest.approx(total, abs=1e-8)
    # intercept, one scalar, and the linear null space of the second-difference penalty
    assert effective_df(design, data, params, "log_normal", 1e12) == pytest.approx(2 + 2, abs=1e-4)


def test_trace_smoother_singular_direction():
    # A = diag(2, 1, 0), D = diag(0, 1, 0): the third direction is in both null spaces
    WC = np.diag([math.sqrt(2.0), 1.0, 0.0])
    R = np.array([[0.0, 1.0, 0.0]])
    assert trace_smoother(WC, R, 1.0) == pytest.approx(1.0 + 0.5)
    assert trace_smoother(WC, R, 0.0) == pytest.approx(2.0)


def test_penalty_factor_reproduces_penalty(small_design):
    _, design = small_design
    R = penalty_factor(design.penalty)
    np.testing.assert_allclose(R.T @ R, design.penalty, atol=1e-12)
    assert R.shape[0] == 6


def test_gcv_arithmetic():
    assert gcv_value(-100.0, 5.0, 50) == pytest.approx(2.0 / 0.81)
    assert gcv_value(-100.0, 50.0, 50) == math.inf
    assert gcv_value(-100.0, 60.0, 50) == math.inf


def test_lambda_grid_shape():
    g = lambda_grid()
    assert g.size == 20 and g[0] == pytest.approx(1.0) and g[-1] == pytest.approx(1e4)
    np.testing.assert_allclose(np.diff(np.log(g)), np.log(1e4) / 19)
    with pytest.raises(ValueError):
        lambda_grid(1)


def test_path_is_self_consistent(lf_model, dgp1_200):
    n = dgp1_200.data.n
    for row in lf_model.gcv_path:
        assert row["gcv"] == pytest.approx(gcv_value(row["loglik"], row["df"], n), abs=1e-10)
    assert lf_model.gcv == min(r["gcv"] for r in lf_model.gcv_path)
    dfs = [r["df"] for r in lf_model.gcv_path]
    assert all(a >= b - 1e-6 for a, b in zip(dfs, dfs[1:]))
    assert len(lf_model.gcv_path) == 20


def test_fit_is_deterministic(dgp1_200, lf_model):
    again = fit_lfaft(dgp1_200.data)
    assert again.to_json() == lf_model.to_json()


def test_warm_start_matches_cold(small_design):
    data, design = small_design
    warm = select_lambda(design, data, "log_normal", grid_size=6, lam_range=(1.0, 100.0))
    cold = select_lambda(design, data, "log_normal", grid_size=6, lam_range=(1.0, 100.0), warm_start=False)
    for a, b in zip(warm.gcv_path, cold.gcv_path):
        assert a["gcv"] == pytest.approx(b["gcv"], rel=1e-4)


def test_all_censored_rejected():
    data = make_dataset(n=10)
    censored = SurvivalDataset(
        [Subject(s.id, s.time, False, s.scalars, s.grid, s.values) for s in data.subjects]
    )
    with pytest.raises(FitError, match="all observations censored"):
        fit_lfaft(censored)


def test_small_x_basis_rejected(small_data):
    with pytest.raises(BasisConfigError):
        fit_afaft(small_data, K_X=2)


def test_null_effect_recovered():
    # curves carry no signal, so the fitted functional term should be near zero
    rng = np.random.default_rng(5)
    grid = np.linspace(0, 1, 50)
    subs = []
    for i in range(300):
        x = np.cumsum(rng.normal(size=50)) / np.sqrt(50)
        t = math.exp(1.0 + 0.5 * rng.normal())
        subs.append(Subject(str(i), t, True, [], grid, x))
    model = fit_lfaft(SurvivalDataset(subs), K=10)
    from funaft.predict import linear_predictor

    eta = linear_predictor(model, SurvivalDataset(subs))
    assert np.std(eta) < 0.1
    assert np.max(np.abs(coef_curve(model).beta_hat)) < 0.5
    assert model.params.gamma[0] == pytest.approx(1.0, abs=0.1)
    assert model.params.sigma == pytest.approx(0.5, abs=0.06)


def test_json_round_trip(tmp_path, lf_model, af_model):
    for model in (lf_model, af_model):
        path = tmp_path / f"{model.model}.json"
        model.save(path)
        back = FittedModel.load(path)
        assert back.to_json() == model.to_json()
        json.loads(path.read_text())


def test_fitted_point_is_stationary(dgp1_200, lf_model):
    from funaft.fitter import _prepare

    data, _ = _prepare(dgp1_200.data, False)
    design = build_linear_design(data, lf_model.s_basis)
    prob = PenalizedProblem.from_data(design, data, lf_model.family, lf_model.lam)
    g = prob.grad(lf_model.theta())
    assert np.max(np.abs(g)) < 1e-3 * data.n
    assert lf_model.converged


def test_afaft_fit_shapes(af_model):
    assert af_model.model == "afaft"
    assert af_model.params.b.size == 36
    assert af_model.column_centers.shape == (36,)
    assert 1.0 <= af_model.lam <= 1e4
