import logging
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from funaft.dataset import Subject, SurvivalDataset  # noqa: E402
from funaft.simulate import Dgp, SimulationConfig, simulate_dgp  # noqa: E402

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.ERROR, logger="funaft")


def make_dataset(n=12, p=15, seed=0, scalars=0, irregular=False, lo=0.0, hi=1.0):
    """Small synthetic dataset with smooth curves and about a third censored."""
    rng = np.random.default_rng(seed)
    subjects = []
    for i in range(n):
        if irregular:
            grid = np.sort(rng.uniform(lo, hi, p))
            grid[0], grid[-1] = lo, hi
        else:
            grid = np.linspace(lo, hi, p)
        u = (grid - lo) / (hi - lo)
        values = rng.normal() + rng.normal() * np.sin(2 * np.pi * u) + 0.3 * rng.normal() * u
        time = float(np.exp(0.5 + 0.4 * rng.normal()))
        event = bool(i % 3 != 1)
        z = rng.normal(size=scalars)
        subjects.append(Subject(str(i), time, event, z, grid, values))
    return SurvivalDataset(subjects, tuple(f"z{j}" for j in range(scalars)))


@pytest.fixture
def small_data():
    return make_dataset()


@pytest.fixture(scope="session")
def dgp1_200():
    return simulate_dgp(SimulationConfig(Dgp.LFAFT_LOGNORMAL, n=200, p=100), seed=11)


@pytest.fixture(scope="session")
def dgp4_100():
    return simulate_dgp(SimulationConfig(Dgp.AFAFT_LOGNORMAL, n=100, p=50), seed=12)


@pytest.fixture(scope="session")
def lf_model(dgp1_200):
    from funaft.fitter import fit_lfaft

    return fit_lfaft(dgp1_200.data)


@pytest.fixture(scope="session")
def af_model(dgp4_100):
    from funaft.fitter import fit_afaft

    return fit_afaft(dgp4_100.data, K_S=6, K_X=6)
