import numpy as np
import pytest
from scipy.signal import lfilter

from arlq.model import Dataset, ParameterVector


def simulate_instance(rng, n_obs, beta, phi, sigma=1.0, burn_in=200):
    beta = np.asarray(beta, dtype=float)
    X = rng.standard_normal((n_obs, beta.size))
    a = sigma * rng.standard_normal(n_obs + burn_in)
    e = lfilter([1.0], np.r_[1.0, -np.asarray(phi, dtype=float)], a)[burn_in:]
    return Dataset(X @ beta + e, X)


def random_params(rng, M, p, sigma2=None):
    # small phi keeps the random points inside the stationary region
    phi = rng.uniform(-0.4, 0.4, size=p) / max(p, 1)
    sigma2 = rng.uniform(0.5, 2.0) if sigma2 is None else sigma2
    return ParameterVector(rng.normal(0, 2, size=M), phi, sigma2)


def central_difference(f, x, rel_step=1e-6):
    """Central finite-difference gradient (or Jacobian when f is vector valued)."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        h = rel_step * (1.0 + abs(x[i]))
        up = x.copy()
        dn = x.copy()
        up[i] += h
        dn[i] -= h
        cols.append((np.asarray(f(up)) - np.asarray(f(dn))) / (2 * h))
    return np.stack(cols, axis=-1)


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_instance(rng):
    return simulate_instance(rng, 40, [1.0, -2.0, 0.5], [0.5, -0.2])


#: PASS/FAIL lines from the acceptance suite, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
