import time

import numpy as np
import pytest

from bayesnam.model import NamConfig, fit
from bayesnam.nn import SgdConfig
from bayesnam.synthetic import case_one, case_two, gen_toy

# Desk-scale toy protocol: 50k train / 10k test, one epoch of plain SGD,
# lr 0.01, batch size 1, [1, 10, 1] subnets.
TOY_TRAIN_SEED = 1
TOY_TEST_SEED = 2
TOY_SGD = SgdConfig(lr=0.01, epochs=1, batch_size=1)
CASE_TWO_SEEDS = (0, 1, 2, 3, 4)

_ACCEPTANCE_LINES = []
# wall-clock seconds spent building each trained-model fixture
FIXTURE_SECONDS = {}


def record_criterion(name: str, ok: bool, detail: str = "") -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
    print(line)
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def case_one_data():
    return gen_toy(case_one(50_000, TOY_TRAIN_SEED)), gen_toy(case_one(10_000, TOY_TEST_SEED))


@pytest.fixture(scope="session")
def case_two_data():
    return gen_toy(case_two(50_000, TOY_TRAIN_SEED)), gen_toy(case_two(10_000, TOY_TEST_SEED))


@pytest.fixture(scope="session")
def case_one_nams(case_one_data):
    train, _ = case_one_data
    t0 = time.perf_counter()
    out = [fit(3, NamConfig(), train, TOY_SGD, seed=s)[0] for s in (0, 1)]
    FIXTURE_SECONDS["case_one_nams"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def case_two_nams(case_two_data):
    train, _ = case_two_data
    t0 = time.perf_counter()
    out = [fit(3, NamConfig(), train, TOY_SGD, seed=s)[0] for s in CASE_TWO_SEEDS]
    FIXTURE_SECONDS["case_two_nams"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def case_two_bayes(case_two_data):
    """BayesNAM with and without feature dropout, keyed by tau."""
    train, _ = case_two_data
    t0 = time.perf_counter()
    out = {}
    for tau in (0.0, 0.1):
        cfg = NamConfig(bayesian=True, tau=tau, s0=1e-4, prior_std=1.0)
        out[tau] = fit(3, cfg, train, TOY_SGD, seed=0)[0]
    FIXTURE_SECONDS["case_two_bayes"] = time.perf_counter() - t0
    return out


def centered_range(grid) -> float:
    return float(np.ptp(grid.mean))
