from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
import pytest

from svrobust.market_data import OptionQuote, OptionSurface
from svrobust.models import BatesParams, FSVParams, HestonParams

TESTS = Path(__file__).resolve().parent
FIXTURES = TESTS / "fixtures"
sys.path.insert(0, str(TESTS))


def load_fixture(name: str) -> dict:
    return json.loads((FIXTURES / name).read_text())


@pytest.fixture
def heston():
    return HestonParams(v0=0.04, kappa=1.5, theta=0.04, sigma=0.3, rho=-0.6)


@pytest.fixture
def bates():
    return BatesParams(v0=0.04, kappa=1.5, theta=0.04, sigma=0.3, rho=-0.6, lam=0.5, muJ=-0.1, sigmaJ=0.25)


@pytest.fixture
def fsv():
    return FSVParams(v0=0.04, kappa=1.5, theta=0.04, sigma=0.3, rho=-0.6, lam=0.5, muJ=-0.1, sigmaJ=0.25,
                     hurst=0.7)


def make_surface(strikes=(90.0, 100.0, 110.0), maturities=(0.5, 1.0), mid=5.0, half=0.1,
                 spot=100.0, rate=0.02) -> OptionSurface:
    quotes = [OptionQuote(K, T, mid - half, mid + half) for T in maturities for K in strikes]
    return OptionSurface(spot=spot, rate=rate, quotes=tuple(quotes))


@pytest.fixture
def small_surface():
    return make_surface()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def fake_run(thetas, full_prices=None, aare=None, model="heston", surface=None):
    """A BootstrapRun assembled from given replications, without calibrating anything."""
    from svrobust.bootstrap import BootstrapConfig, BootstrapRun, BootstrapSample, TrialOutcome
    from svrobust.calibration import CalibrationResult
    from svrobust.models import from_vector
    from svrobust.pricing import McConfig

    thetas = np.asarray(thetas, dtype=float)
    m = len(thetas)
    surface = surface or make_surface()
    n = len(surface)
    full_prices = np.full((m, n), 5.0) if full_prices is None else np.asarray(full_prices, dtype=float)
    aare = np.zeros(m) if aare is None else np.asarray(aare, dtype=float)
    outcomes = []
    for i in range(m):
        theta = from_vector(model, thetas[i])
        res = CalibrationResult(model, theta, 0.0, full_prices[i], float(aare[i]), 1, True, i)
        outcomes.append(TrialOutcome(i, i, BootstrapSample(tuple(range(n))), res, full_prices[i], float(aare[i])))
    return BootstrapRun(surface, BootstrapConfig(model, trials=max(m, 2), mc=McConfig() if model == "fsv" else None), tuple(outcomes))


# ---------------------------------------------------------------------------
# one summary line per acceptance criterion

_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when == "teardown" and not report.failed:
        return
    n, title = marker.args
    entry = _CRITERIA.setdefault(n, [title, True, 0.0])
    entry[1] = entry[1] and not report.failed
    # setup counts too: module fixtures do the heavy work for some criteria
    entry[2] += report.duration


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, seconds = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {title} ({seconds:.1f} s)")
