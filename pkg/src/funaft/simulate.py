"""Synthetic survival data with functional covariates, and a replicate study runner.

Five data-generating models are available:

=================== ===============================================================
``lfaft_lognormal``   log T = 0.5 + int X beta + 0.5 eps,  eps ~ N(0, 1)
``lfaft_loglogistic`` same with eps ~ Logistic(0, 1)
``cox_linear``        S(t) = exp(-e^eta L0(t)),  eta = int X beta
``afaft_lognormal``   log T = 0.5 + int F(s, X(s)) ds + 0.5 eps,  F = 0.05 x^2 s
``cox_additive``      Cox with eta = int F(s, X(s)) ds,  F = -0.05 x^2 s
=================== ===============================================================

with ``beta(s) = 0.3 - (s - 0.2)^2``, a Weibull cumulative baseline hazard
``L0(t) = (t / b)^a`` and independent ``Uniform(0, u)`` censoring.
"""

from __future__ import annotations

import csv
import enum
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from .basis import basis_matrix
from .dataset import Subject, SurvivalDataset
from .likelihood import Family, survival

log = logging.getLogger(__name__)


class Dgp(str, enum.Enum):
    LFAFT_LOGNORMAL = "lfaft_lognormal"
    LFAFT_LOGLOGISTIC = "lfaft_loglogistic"
    COX_LINEAR = "cox_linear"
    AFAFT_LOGNORMAL = "afaft_lognormal"
    COX_ADDITIVE = "cox_additive"

    @property
    def linear(self) -> bool:
        return self in (Dgp.LFAFT_LOGNORMAL, Dgp.LFAFT_LOGLOGISTIC, Dgp.COX_LINEAR)

    @property
    def cox(self) -> bool:
        return self in (Dgp.COX_LINEAR, Dgp.COX_ADDITIVE)

    @property
    def default_u(self) -> float:
        return 250.0 if self.linear else 2000.0


ESTIMATORS = ("lfaft_lognormal", "lfaft_loglogistic", "afaft_lognormal")


def fourier_eigenfunctions(J: int) -> Callable[[np.ndarray], np.ndarray]:
    """``1, sqrt2 sin(2 pi s), sqrt2 cos(2 pi s), ...``: orthonormal on [0, 1]."""

    def phi(s):
        s = np.asarray(s, dtype=float)
        out = [np.ones_like(s)]
        k = 1
        while len(out) < J:
            out.append(math.sqrt(2) * np.sin(2 * math.pi * k * s))
            if len(out) < J:
                out.append(math.sqrt(2) * np.cos(2 * math.pi * k * s))
            k += 1
        return np.vstack(out[:J])

    return phi


def _zero_mean(s):
    return np.zeros_like(np.asarray(s, dtype=float))


@dataclass(frozen=True)
class FpcGenerator:
    """Curves ``mean(s) + sum_m xi_m phi_m(s)`` with ``xi_m ~ N(0, eigenvalue_m)``."""

    mean_fn: Callable = _zero_mean
    eigenfunctions: Callable = field(default_factory=lambda: fourier_eigenfunctions(8))
    eigenvalues: tuple = tuple(0.5 ** np.arange(8))
    noise_sd: float = 0.0

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if ev.ndim != 1 or ev.size == 0:
            raise ValueError("eigenvalues must be a nonempty vector")
        if np.any(ev < 0) or np.any(np.diff(ev) > 0):
            raise ValueError("eigenvalues must be nonnegative and nonincreasing")
        object.__setattr__(self, "eigenvalues", tuple(ev.tolist()))

    @property
    def J(self) -> int:
        return len(self.eigenvalues)


def _bump(amplitude: float, center: float = 0.25, width: float = 0.25) -> Callable:
    def mean_fn(s):
        return amplitude * np.exp(-(((np.asarray(s, dtype=float) - center) / width) ** 2))

    return mean_fn


def pupil_like_generator(amplitude: float = 31.0, variance: float = 28.0) -> FpcGenerator:
    """Curves with a constriction-like bump at s = 0.25 plus Fourier FPC variation.

    Eigenvalues are ``variance * 0.5^m`` on 8 Fourier functions. The defaults
    are calibrated for the additive models: about 30% censoring at u = 2000.
    """
    return FpcGenerator(
        mean_fn=_bump(amplitude),
        eigenfunctions=fourier_eigenfunctions(8),
        eigenvalues=tuple(variance * 0.5 ** np.arange(8)),
    )


def study_generator(dgp) -> FpcGenerator:
    """Default covariate generator for a data-generating model.

    The additive truth grows with x^2, so one generator cannot give about 30%
    censoring under both model classes. Linear models get a lower bump with
    more curve-to-curve variation (about 30% censoring at u = 250), which also
    carries enough information for nominal bootstrap coverage at n = 200.
    """
    if Dgp(dgp).linear:
        return pupil_like_generator(amplitude=20.0, variance=400.0)
    return pupil_like_generator()


@dataclass(frozen=True, eq=False)
class FunctionalSample:
    grid: np.ndarray
    curves: np.ndarray
    scores: np.ndarray


def even_grid(p: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, p)


def gen_functional(gen: FpcGenerator, n: int, p: int, seed=None) -> FunctionalSample:
    rng = np.random.default_rng(seed)
    grid = even_grid(p)
    phi = gen.eigenfunctions(grid)[: gen.J]
    sd = np.sqrt(np.asarray(gen.eigenvalues))
    scores = rng.standard_normal((n, gen.J)) * sd
    curves = gen.mean_fn(grid)[None, :] + scores @ phi
    if gen.noise_sd > 0:
        curves = curves + gen.noise_sd * rng.standard_normal(curves.shape)
    return FunctionalSample(grid, curves, scores)


def true_beta(s):
    s = np.asarray(s, dtype=float)
    return 0.3 - (s - 0.2) ** 2


def true_surface(dgp: Dgp) -> Callable:
    coef = -0.05 if dgp is Dgp.COX_ADDITIVE else 0.05
    return lambda s, x: coef * np.asarray(x) ** 2 * np.asarray(s)


@dataclass(frozen=True)
class SimulationConfig:
    dgp: Dgp = Dgp.LFAFT_LOGNORMAL
    n: int = 100
    p: int = 100
    u: float | None = None
    seed: int = 0
    intercept: float = 0.5
    scale: float = 0.5
    # Weibull cumulative baseline hazard (t / b)^a for the Cox models
    baseline: tuple = (1.5, 50.0)
    # optional spline truth for beta: (SplineBasis, coefficients)
    beta_spline: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "dgp", Dgp(self.dgp))
        if self.u is None:
            object.__setattr__(self, "u", self.dgp.default_u)
        if self.n < 10 or self.p < 10:
            raise ValueError("simulation needs n >= 10 and p >= 10")
        if not self.u > 0:
            raise ValueError("censoring bound u must be positive")

    def beta(self, s) -> np.ndarray:
        if self.beta_spline is not None:
            basis, coef = self.beta_spline
            return basis_matrix(basis, s) @ np.asarray(coef)
        return true_beta(s)

    def aft_beta(self, s) -> np.ndarray:
        """Coefficient on the log-time scale; ``-beta / a`` under the Weibull Cox models."""
        if self.dgp.cox:
            return -self.beta(s) / self.baseline[0]
        return self.beta(s)


@dataclass(frozen=True, eq=False)
class SimulatedData:
    data: SurvivalDataset
    config: SimulationConfig
    eta: np.ndarray
    event_times: np.ndarray
    censor_times: np.ndarray
    sample: FunctionalSample

    @property
    def censoring_rate(self) -> float:
        return float(1.0 - self.data.events.mean())

    def true_survival(self, t_grid) -> np.ndarray:
        return true_survival(self.config, self.eta, t_grid)

    def truth_dict(self) -> dict:
        cfg = self.config
        d = {
            "dgp": cfg.dgp.value,
            "n": cfg.n,
            "p": cfg.p,
            "u": cfg.u,
            "seed": cfg.seed,
            "censoring_rate": self.censoring_rate,
        }
        if cfg.dgp.cox:
            d["baseline_weibull"] = {"a": cfg.baseline[0], "b": cfg.baseline[1]}
        else:
            d["intercept"] = cfg.intercept
            d["scale"] = cfg.scale
            d["family"] = "log_logistic" if cfg.dgp is Dgp.LFAFT_LOGLOGISTIC else "log_normal"
        if cfg.dgp.linear:
            d["beta"] = {"s": self.sample.grid.tolist(), "value": cfg.beta(self.sample.grid).tolist()}
        else:
            d["surface"] = "F(s,x) = %g * x^2 * s" % (-0.05 if cfg.dgp is Dgp.COX_ADDITIVE else 0.05)
        return d


def true_survival(config: SimulationConfig, eta, t_grid) -> np.ndarray:
    """True ``S_i(t)`` (subjects x times) given each subject's linear predictor."""
    eta = np.asarray(eta, dtype=float)[:, None]
    t = np.asarray(t_grid, dtype=float)[None, :]
    if config.dgp.cox:
        a, b = config.baseline
        return np.exp(-np.exp(eta) * (t / b) ** a)
    fam = Family.LOG_LOGISTIC if config.dgp is Dgp.LFAFT_LOGLOGISTIC else Family.LOG_NORMAL
    return survival(fam, t, eta, config.scale)


def functional_effect(config: SimulationConfig, sample: FunctionalSample) -> np.ndarray:
    """``int X beta`` or ``int F(s, X(s)) ds`` with 1/p weights on the even grid."""
    grid = sample.grid
    q = 1.0 / grid.size
    if config.dgp.linear:
        return (sample.curves * config.beta(grid)).sum(axis=1) * q
    F = true_surface(config.dgp)
    return F(grid[None, :], sample.curves).sum(axis=1) * q


def simulate_dgp(config: SimulationConfig, gen: FpcGenerator | None = None, seed=None) -> SimulatedData:
    """Draw one dataset; ``seed`` (any numpy seed) overrides ``config.seed``."""
    gen = gen or study_generator(config.dgp)
    rng = np.random.default_rng(config.seed if seed is None else seed)
    sample = gen_functional(gen, config.n, config.p, rng)
    effect = functional_effect(config, sample)
    if config.dgp.cox:
        eta = effect
        a, b = config.baseline
        U = rng.uniform(size=config.n)
        T = b * (-np.log(U) * np.exp(-eta)) ** (1.0 / a)
    else:
        eta = config.intercept + effect
        if config.dgp is Dgp.LFAFT_LOGLOGISTIC:
            eps = rng.logistic(size=config.n)
        else:
            eps = rng.standard_normal(config.n)
        T = np.exp(eta + config.scale * eps)
    C = rng.uniform(0.0, config.u, size=config.n)
    # guard against a zero draw from either distribution
    T = np.maximum(T, 1e-300)
    C = np.maximum(C, 1e-300)
    Y = np.minimum(T, C)
    delta = T <= C
    subjects = tuple(
        Subject(str(i + 1), float(Y[i]), bool(delta[i]), np.zeros(0), sample.grid, sample.curves[i])
        for i in range(config.n)
    )
    data = SurvivalDataset(subjects, (), (0.0, 1.0))
    return SimulatedData(data, config, eta, T, C, sample)


# ---------------------------------------------------------------------------
# study runner

RESULT_COLUMNS = ("dgp", "n", "p", "estimator", "replicate", "mise_beta", "mise_surv", "brier", "fit_seconds", "converged")


def fit_estimator(name: str, data: SurvivalDataset, grid_size: int = 20, K: int = 20, K_S: int = 10, K_X: int = 10):
    from .fitter import fit_afaft, fit_lfaft

    if name == "lfaft_lognormal":
        return fit_lfaft(data, "log_normal", K=K, grid_size=grid_size)
    if name == "lfaft_loglogistic":
        return fit_lfaft(data, "log_logistic", K=K, grid_size=grid_size)
    if name == "afaft_lognormal":
        return fit_afaft(data, "log_normal", K_S=K_S, K_X=K_X, grid_size=grid_size)
    raise ValueError(f"unknown estimator {name!r}; expected one of {ESTIMATORS}")


def evaluate_fit(model, sim_test: SimulatedData, window) -> dict:
    """MISE of beta (linear truths, lfAFT only), survival MISE and Brier on the test set."""
    from .metrics import brier, mise
    from .predict import coef_curve, survival_matrix

    t = window.grid()
    mise_beta = math.nan
    if sim_test.config.dgp.linear and model.model == "lfaft":
        curve = coef_curve(model, 101)
        mise_beta = mise(curve.beta_hat, sim_test.config.beta(curve.s_grid), curve.s_grid)
    S_hat = survival_matrix(model, sim_test.data, t, clamp_x=True)
    S_true = sim_test.true_survival(t)
    test = sim_test.data
    return {
        "mise_beta": mise_beta,
        "mise_surv": mise(S_hat, S_true, t),
        "brier": brier(S_hat, test.times, test.events, t),
    }


def _replicate_seeds(seed: int, cfg_index: int, replicate: int):
    train, test = np.random.SeedSequence([seed, cfg_index, replicate]).spawn(2)
    return train, test


def _run_replicate(cfg_index, config, replicate, estimators, seed, window, gen, record_timing, fit_kwargs):
    rows = []
    with threadpool_limits(1):
        s_train, s_test = _replicate_seeds(seed, cfg_index, replicate)
        train = simulate_dgp(config, gen, seed=s_train)
        test = simulate_dgp(config, gen, seed=s_test)
        for est in estimators:
            row = {
                "dgp": config.dgp.value,
                "n": config.n,
                "p": config.p,
                "estimator": est,
                "replicate": replicate,
                "mise_beta": math.nan,
                "mise_surv": math.nan,
                "brier": math.nan,
                "fit_seconds": math.nan,
                "converged": False,
            }
            try:
                t0 = time.perf_counter()
                model = fit_estimator(est, train.data, **fit_kwargs)
                elapsed = time.perf_counter() - t0
                row.update(evaluate_fit(model, test, window))
                row["converged"] = bool(model.converged)
                if record_timing:
                    row["fit_seconds"] = elapsed
            except Exception as exc:  # noqa: BLE001 - a failed replicate must not stop the study
                log.warning("%s n=%d rep=%d %s failed: %s", config.dgp.value, config.n, replicate, est, exc)
            rows.append(row)
    return rows


def run_study(
    configs: Iterable[SimulationConfig],
    replicates: int,
    estimators: Iterable[str],
    seed: int = 0,
    jobs: int = 1,
    window=None,
    gen: FpcGenerator | None = None,
    out_path=None,
    record_timing: bool = True,
    fit_kwargs: dict | None = None,
) -> list[dict]:
    """Simulate train/test pairs per (config, replicate), fit every estimator, score on test.

    Rows come back ordered by (config, replicate, estimator) whatever ``jobs``
    is; with ``out_path`` they are also appended to a CSV as they finish.
    """
    from .metrics import MetricWindow

    configs = list(configs)
    estimators = list(estimators)
    for est in estimators:
        if est not in ESTIMATORS:
            raise ValueError(f"unknown estimator {est!r}; expected one of {ESTIMATORS}")
    window = window or MetricWindow()
    fit_kwargs = fit_kwargs or {}
    tasks = [
        delayed(_run_replicate)(ci, cfg, r, estimators, seed, window, gen, record_timing, fit_kwargs)
        for ci, cfg in enumerate(configs)
        for r in range(replicates)
    ]
    fh = writer = None
    if out_path is not None:
        fh = open(out_path, "w", newline="", encoding="utf-8")
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
    rows = []
    try:
        if jobs == 1:
            stream = (fn(*a, **kw) for fn, a, kw in tasks)
        else:
            stream = Parallel(n_jobs=jobs, return_as="generator")(tasks)
        for chunk in stream:
            rows.extend(chunk)
            if writer is not None:
                writer.writerows(_format_row(r) for r in chunk)
                fh.flush()
    finally:
        if fh is not None:
            fh.close()
    return rows


def _format_row(row: dict) -> dict:
    out = {}
    for k in RESULT_COLUMNS:
        v = row[k]
        if isinstance(v, bool):
            out[k] = int(v)
        elif isinstance(v, float):
            out[k] = repr(v)
        else:
            out[k] = v
    return out


def read_results(path) -> list[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            rows.append(
                {
                    "dgp": r["dgp"],
                    "n": int(r["n"]),
                    "p": int(r["p"]),
                    "estimator": r["estimator"],
                    "replicate": int(r["replicate"]),
                    "mise_beta": float(r["mise_beta"]),
                    "mise_surv": float(r["mise_surv"]),
                    "brier": float(r["brier"]),
                    "fit_seconds": float(r["fit_seconds"]),
                    "converged": bool(int(r["converged"])),
                }
            )
    return rows


SUMMARY_COLUMNS = (
    "dgp", "n", "p", "estimator", "n_ok",
    "log_mise_beta_median", "log_mise_beta_iqr",
    "log_mise_surv_median", "log_mise_surv_iqr",
    "brier_median", "brier_iqr",
    "fit_seconds_median",
)


def _median_iqr(values):
    v = np.asarray([x for x in values if math.isfinite(x)], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return float(med), float(q3 - q1)


def summarize(rows: list[dict]) -> list[dict]:
    """Median and IQR per (dgp, n, p, estimator): the data behind boxplot figures."""
    key = lambda r: (r["dgp"], r["n"], r["p"], r["estimator"])  # noqa: E731
    out = []
    for k, group in itertools.groupby(sorted(rows, key=key), key=key):
        group = list(group)

        def logs(col):
            return [math.log(r[col]) if r[col] > 0 else math.nan for r in group]

        mb = _median_iqr(logs("mise_beta"))
        ms = _median_iqr(logs("mise_surv"))
        br = _median_iqr([r["brier"] for r in group])
        ft = _median_iqr([r["fit_seconds"] for r in group])
        out.append(
            {
                "dgp": k[0], "n": k[1], "p": k[2], "estimator": k[3],
                "n_ok": sum(math.isfinite(r["mise_surv"]) for r in group),
                "log_mise_beta_median": mb[0], "log_mise_beta_iqr": mb[1],
                "log_mise_surv_median": ms[0], "log_mise_surv_iqr": ms[1],
                "brier_median": br[0], "brier_iqr": br[1],
                "fit_seconds_median": ft[0],
            }
        )
    return out


def expand_scenarios(scenario: dict) -> list[SimulationConfig]:
    """Cartesian expansion of one scenario entry whose n/p/dgp may be lists."""

    def as_list(v):
        return list(v) if isinstance(v, (list, tuple)) else [v]

    out = []
    for dgp, n, p in itertools.product(as_list(scenario["dgp"]), as_list(scenario.get("n", 100)), as_list(scenario.get("p", 100))):
        kw = {k: scenario[k] for k in ("u", "intercept", "scale") if k in scenario}
        if "baseline" in scenario:
            kw["baseline"] = tuple(scenario["baseline"])
        out.append(SimulationConfig(Dgp(dgp), int(n), int(p), **kw))
    return out
