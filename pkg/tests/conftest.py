import numpy as np
import pytest

from commonbath.quad_model import BathSpec

_ACCEPTANCE_LINES: list[str] = []


def stiffness_by_polarization(potential, n):
    """Recover K from a quadratic potential V(r) = r K r / 2 by evaluating V only."""
    eye = np.eye(n)
    K = np.empty((n, n))
    for i in range(n):
        K[i, i] = 2.0 * potential(eye[i])
        for j in range(i + 1, n):
            K[i, j] = K[j, i] = potential(eye[i] + eye[j]) - potential(eye[i]) - potential(eye[j])
    return K


def random_bath(rng, max_modes=6, lo=0.1, hi=10.0):
    n = int(rng.integers(0, max_modes + 1))
    return BathSpec.from_arrays(rng.uniform(lo, hi, n), rng.uniform(lo, hi, n))


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture
def small_bath():
    return BathSpec.from_pairs([(1.0, 0.5)])


@pytest.fixture
def unit_bath():
    return BathSpec.from_pairs([(1.0, 1.0)])


@pytest.fixture
def acceptance():
    def record(number, title, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        _ACCEPTANCE_LINES.append(f"[{status}] criterion {number:>2}: {title}" + (f" ({detail})" if detail else ""))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
