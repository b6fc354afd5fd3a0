"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that conftest prints in the terminal
summary, then asserts. Sizes and tolerances are the stated ones.
"""

import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

import conftest
from funaft.basis import TensorBasis, basis_matrix, make_bspline_basis, make_penalty, make_tensor_penalty
from funaft.design import build_linear_design
from funaft.fitter import _prepare, effective_df, fit_afaft, fit_at_lambda, fit_lfaft
from funaft.likelihood import Family, ParamVector, PenalizedProblem, log_density, penalized_loglik, survival
from funaft.metrics import mise
from funaft.predict import bootstrap_ci, bootstrap_draws, coef_curve
from funaft.simulate import Dgp, SimulationConfig, run_study, simulate_dgp, true_beta

from conftest import make_dataset
from oracles import df_dense_inverse, linear_design_loop, loglogistic_loglik_hand, lognormal_loglik_hand

pytestmark = pytest.mark.slow


def _record(num, passed, detail):
    conftest.ACCEPTANCE[num] = (bool(passed), detail)
    print(f"criterion {num}: {'PASS' if passed else 'FAIL'}  {detail}")


def test_criterion_1_numerical_kernels():
    t0 = time.perf_counter()
    checks = {}

    x = np.random.default_rng(0).uniform(0, 1, 2000)
    B = basis_matrix(make_bspline_basis(K=20), x)
    checks["partition"] = np.max(np.abs(B.sum(axis=1) - 1)) < 1e-12

    D = make_penalty(20)
    tp = make_tensor_penalty(TensorBasis(make_bspline_basis(K=10), make_bspline_basis((-3, 3), K=10)))
    j, k = np.meshgrid(np.arange(10.0), np.arange(10.0), indexing="ij")
    # exactly zero when the affine coefficients are exact in binary; rounding-level otherwise
    line = 0.7 - 0.3 * np.arange(20.0)
    checks["null_space"] = (
        D.quad(np.full(20, 2.5)) == 0.0
        and D.quad(1.0 - 0.25 * np.arange(20.0)) == 0.0
        and tp.quad((1.0 + 2.0 * j - 0.5 * k).ravel()) == 0.0
        and D.quad(line) < 1e-20 * float(line @ line)
    )

    worst = 0.0
    data = make_dataset(n=30, p=15, scalars=1, seed=1)
    design = build_linear_design(data, make_bspline_basis(K=8))
    rng = np.random.default_rng(2)
    for family in Family:
        prob = PenalizedProblem.from_data(design, data, family, 2.0)
        for _ in range(20):
            theta = rng.normal(scale=0.5, size=prob.dim)
            g = prob.grad(theta)
            fd = np.empty_like(g)
            for i in range(theta.size):
                h = 1e-6 * max(1.0, abs(theta[i]))
                e = np.zeros_like(theta)
                e[i] = h
                fd[i] = (prob.loglik(theta + e) - prob.loglik(theta - e)) / (2 * h)
            worst = max(worst, float(np.max(np.abs(g - fd) / np.maximum(1.0, np.abs(fd)))))
    checks["gradient"] = worst < 1e-5

    mass = []
    for family in Family:
        for eta, sigma in ((0.0, 1.0), (1.5, 0.4), (-1.0, 2.0)):
            total, _ = quad(lambda u: math.exp(log_density(family, math.exp(u), eta, sigma) + u), -60, 80, limit=400)
            mass.append(abs(total - 1))
    checks["density"] = max(mass) < 1e-4

    t = np.r_[0.0, np.geomspace(1e-4, 1e4, 300)]
    mono = True
    for family in Family:
        for eta, sigma in zip(rng.normal(0, 2, 100), rng.uniform(0.05, 3, 100)):
            S = survival(family, t, eta, sigma)
            mono &= bool(S[0] == 1 and np.all(np.diff(S) <= 0))
    checks["monotone"] = mono

    elapsed = time.perf_counter() - t0
    passed = all(checks.values()) and elapsed < 10
    _record(1, passed, f"{checks}, max FD rel err {worst:.2e}, {elapsed:.1f}s")
    assert passed


def test_criterion_2_oracle_equivalence():
    t0 = time.perf_counter()
    from funaft.dataset import Subject, SurvivalDataset

    rng = np.random.default_rng(0)
    grid = np.linspace(0, 1, 5)
    curves = rng.normal(size=(3, 5))
    data = SurvivalDataset([Subject(str(i), 1.0 + i, True, [], grid, c) for i, c in enumerate(curves)])
    basis = make_bspline_basis(K=4)
    design = build_linear_design(data, basis, "riemann")
    ref = linear_design_loop([grid] * 3, curves, [np.full(5, 0.2)] * 3, basis.knots, 3, 4)
    design_err = float(np.max(np.abs(design.functional_block - ref)))

    sim = simulate_dgp(SimulationConfig(Dgp.LFAFT_LOGNORMAL, n=200, p=100), seed=5)
    d2 = build_linear_design(sim.data, make_bspline_basis(K=20))
    theta, prob, _ = fit_at_lambda(d2, sim.data, "log_normal", 100.0)
    params = ParamVector.from_array(theta, 1)
    df = effective_df(d2, sim.data, params, "log_normal", 100.0)
    df_err = abs(df - df_dense_inverse(d2.full, prob.eta_curvature(theta), d2.penalty, 100.0))

    subs = [
        Subject("a", 2.0, True, [0.5], np.linspace(0, 1, 4), [1.0, 0.0, -1.0, 2.0]),
        Subject("b", 0.7, False, [-1.0], np.linspace(0, 1, 4), [0.5, 0.5, 0.5, 0.5]),
        Subject("c", 5.5, True, [0.0], np.linspace(0, 1, 4), [-1.0, 2.0, 1.0, 0.0]),
    ]
    toy = SurvivalDataset(subs, ("z",))
    td = build_linear_design(toy, make_bspline_basis(K=4), "riemann")
    p = ParamVector(np.array([0.3, -0.2]), np.array([0.4, -0.1, 0.2, 0.3]), math.log(0.8))
    eta = td.full @ np.r_[p.gamma, p.b]
    pen = 2.5 * ((p.b[0] - 2 * p.b[1] + p.b[2]) ** 2 + (p.b[1] - 2 * p.b[2] + p.b[3]) ** 2)
    ll_err = 0.0
    for family, hand in ((Family.LOG_NORMAL, lognormal_loglik_hand), (Family.LOG_LOGISTIC, loglogistic_loglik_hand)):
        expected = sum(hand(s.time, s.event, e, p.sigma) for s, e in zip(subs, eta)) - pen
        ll_err = max(ll_err, abs(penalized_loglik(td, toy, p, family, 2.5) - expected))

    elapsed = time.perf_counter() - t0
    passed = design_err < 1e-12 and df_err < 1e-8 and ll_err < 1e-10 and elapsed < 30
    _record(2, passed, f"design {design_err:.1e}, df {df_err:.1e}, loglik {ll_err:.1e}, {elapsed:.1f}s")
    assert passed


def test_criterion_3_parameter_recovery():
    t0 = time.perf_counter()
    sim = simulate_dgp(SimulationConfig(Dgp.LFAFT_LOGNORMAL, n=2000, p=100), seed=2024)
    model = fit_lfaft(sim.data, K=20)
    curve = coef_curve(model, 201)
    truth = true_beta(curve.s_grid)
    ratio = mise(curve.beta_hat, truth, curve.s_grid) / mise(np.zeros_like(truth), truth, curve.s_grid)
    intercept = float(model.params.gamma[0])
    sigma = model.params.sigma
    elapsed = time.perf_counter() - t0
    passed = abs(intercept - 0.5) <= 0.1 and abs(sigma - 0.5) <= 0.05 and ratio < 0.25 and elapsed < 300
    _record(3, passed, f"intercept {intercept:.3f}, sigma {sigma:.3f}, ISE ratio {ratio:.4f}, {elapsed:.1f}s")
    assert passed


def _median(rows, dgp, n, est, col):
    vals = [r[col] for r in rows if r["dgp"] == dgp and r["n"] == n and r["estimator"] == est and math.isfinite(r[col])]
    return float(np.median(vals)), len(vals)


def test_criterion_4_simulation_trends():
    t0 = time.perf_counter()
    reps = 50
    kw = dict(seed=2024, record_timing=False)
    rows_a = run_study(
        [SimulationConfig(Dgp.LFAFT_LOGNORMAL, n=100, p=100), SimulationConfig(Dgp.LFAFT_LOGNORMAL, n=500, p=100)],
        reps, ["lfaft_lognormal"], **kw,
    )
    m100, k100 = _median(rows_a, "lfaft_lognormal", 100, "lfaft_lognormal", "mise_beta")
    m500, k500 = _median(rows_a, "lfaft_lognormal", 500, "lfaft_lognormal", "mise_beta")
    a_ok = m500 < m100

    rows_b = run_study(
        [SimulationConfig(Dgp.LFAFT_LOGLOGISTIC, n=500, p=100)], reps, ["lfaft_loglogistic", "lfaft_lognormal"], **kw
    )
    ll, _ = _median(rows_b, "lfaft_loglogistic", 500, "lfaft_loglogistic", "mise_surv")
    ln, _ = _median(rows_b, "lfaft_loglogistic", 500, "lfaft_lognormal", "mise_surv")
    b_ok = ll <= ln

    rows_c = run_study(
        [SimulationConfig(Dgp.AFAFT_LOGNORMAL, n=1000, p=100)], reps, ["afaft_lognormal", "lfaft_lognormal"], **kw
    )
    af, kaf = _median(rows_c, "afaft_lognormal", 1000, "afaft_lognormal", "brier")
    lf, klf = _median(rows_c, "afaft_lognormal", 1000, "lfaft_lognormal", "brier")
    c_ok = af < lf

    elapsed = time.perf_counter() - t0
    passed = a_ok and b_ok and c_ok and elapsed < 1800 and min(k100, k500, kaf, klf) == reps
    _record(
        4, passed,
        f"(a) MISE beta n=100 {m100:.2e} vs n=500 {m500:.2e}; (b) surv-MISE loglogistic {ll:.2e} vs lognormal {ln:.2e}; "
        f"(c) Brier afAFT {af:.4f} vs lfAFT {lf:.4f} (n=1000); {elapsed:.0f}s",
    )
    assert passed


def test_criterion_5_censoring_calibration():
    lin = simulate_dgp(SimulationConfig(Dgp.LFAFT_LOGNORMAL, n=10000, p=100, u=250), seed=77).censoring_rate
    add = simulate_dgp(SimulationConfig(Dgp.AFAFT_LOGNORMAL, n=10000, p=100, u=2000), seed=78).censoring_rate
    passed = 0.25 <= lin <= 0.35 and 0.25 <= add <= 0.35
    _record(5, passed, f"DGP1 u=250 {lin:.3f}, DGP4 u=2000 {add:.3f}")
    assert passed


def test_criterion_6_inference_calibration():
    t0 = time.perf_counter()
    reps, B = 100, 200
    truth = float(true_beta(0.5))
    covered = 0
    ss = np.random.SeedSequence(606).spawn(reps)
    for r in range(reps):
        sim = simulate_dgp(SimulationConfig(Dgp.LFAFT_LOGNORMAL, n=200, p=100), seed=ss[r])
        model = fit_lfaft(sim.data)
        ci = bootstrap_ci(model, sim.data, B=B, seed=r)
        i = int(np.argmin(np.abs(ci.s_grid - 0.5)))
        covered += ci.lower95[i] <= truth <= ci.upper95[i]
    coverage = covered / reps

    sim = simulate_dgp(SimulationConfig(Dgp.LFAFT_LOGNORMAL, n=200, p=100), seed=ss[0])
    model = fit_lfaft(sim.data)
    one = bootstrap_draws(model, sim.data, B=B, seed=9, jobs=1)
    four = bootstrap_draws(model, sim.data, B=B, seed=9, jobs=4)
    identical = np.array_equal(one, four)

    elapsed = time.perf_counter() - t0
    passed = 0.85 <= coverage <= 0.99 and identical and elapsed < 1200
    _record(6, passed, f"coverage of beta(0.5) {coverage:.2f} over {reps} reps, jobs 1 vs 4 identical={identical}, {elapsed:.0f}s")
    assert passed


def test_criterion_7_runtime():
    sim = simulate_dgp(SimulationConfig(Dgp.LFAFT_LOGNORMAL, n=200, p=100), seed=70)
    t0 = time.perf_counter()
    fit_lfaft(sim.data, K=20, grid_size=20)
    lf = time.perf_counter() - t0
    sim4 = simulate_dgp(SimulationConfig(Dgp.AFAFT_LOGNORMAL, n=100, p=100), seed=71)
    t0 = time.perf_counter()
    fit_afaft(sim4.data, K_S=10, K_X=10)
    af = time.perf_counter() - t0
    passed = lf < 10 and af < 60
    _record(7, passed, f"lfAFT n=200 {lf:.2f}s, afAFT n=100 {af:.2f}s")
    assert passed


def test_criterion_8_gcv_behavior():
    sim = simulate_dgp(SimulationConfig(Dgp.LFAFT_LOGNORMAL, n=200, p=100), seed=80)
    model = fit_lfaft(sim.data)
    path = model.gcv_path
    lams = [r["lambda"] for r in path]
    dfs = np.array([r["df"] for r in path])
    total = 1 + 20
    ascending = len(path) == 20 and all(a < b for a, b in zip(lams, lams[1:]))
    nonincreasing = bool(np.all(np.diff(dfs) <= 0))
    bounded = bool(np.all((dfs >= 3) & (dfs <= total)))
    at_min = model.gcv == min(r["gcv"] for r in path)
    passed = ascending and nonincreasing and bounded and at_min
    _record(
        8, passed,
        f"df {dfs[0]:.2f} -> {dfs[-1]:.2f} nonincreasing={nonincreasing}, in [3, {total}]={bounded}, "
        f"lambda_hat={model.lam:.3g} is path minimum={at_min}",
    )
    assert passed
