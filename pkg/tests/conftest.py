import math
import time

import numpy as np
import pytest

from supjump import GammaMixture, JumpMeasure, ModelParams, discretize

# published fitted parameters, Nagara 2023 (w = 1)
NAGARA = dict(alpha=1.438, beta=10.53, b=2.071e4, lam=2.130e-5, mu=8.190e-6)


def nondim_params(kind="mf", w=1.0, alpha=4.0):
    """Nondimensional configuration: b = 1, mean 1, M1 = 0.5, M2 = 2.

    The Gamma scale is set so that R = 1 - M1, i.e. beta (alpha - 1) = 2.
    """
    return ModelParams(kind, 1.0, w, JumpMeasure(0.25, 0.5), GammaMixture(alpha, 2.0 / (alpha - 1.0)))


@pytest.fixture
def nagara():
    return ModelParams("previous", NAGARA["b"], 1.0, JumpMeasure(NAGARA["mu"], NAGARA["lam"]),
                       GammaMixture(NAGARA["alpha"], NAGARA["beta"]))


@pytest.fixture(scope="session")
def grid512():
    return discretize(GammaMixture(4.0, 2.0 / 3.0), 512)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance reporting -------------------------------------------------

ACCEPTANCE = []
_START = []


def record(criterion: str, ok: bool, detail: str, echo: bool = True) -> bool:
    """Log one acceptance line; printed immediately and again in the summary."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE.append((criterion, line))
    if echo:
        print(line)
    return ok


def pytest_sessionstart(session):
    _START.append(time.perf_counter())


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    stats = terminalreporter.stats
    if not ACCEPTANCE:
        return

    def count(key):
        return sum(1 for r in stats.get(key, []) if "test_acceptance" not in r.nodeid)

    passed, failed, errors = count("passed"), count("failed"), count("error")
    if passed + failed + errors:
        minutes = (time.perf_counter() - _START[0]) / 60 if _START else math.nan
        ok = failed == 0 and errors == 0 and minutes < 10
        record("9", ok, f"module property suites: {passed} passed, {failed} failed, {errors} errors; "
                        f"session {minutes:.1f} min", echo=False)
    tr = terminalreporter
    tr.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE, key=lambda t: t[0]):
        tr.write_line(line)
