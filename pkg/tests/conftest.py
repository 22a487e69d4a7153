import numpy as np
import pytest

from qfilterlab import matops
from qfilterlab.model import QsdeModel


def random_matrix(rng, p, scale=1.0):
    return scale * (rng.normal(size=(p, p)) + 1j * rng.normal(size=(p, p)))


def random_hermitian(rng, p, scale=1.0):
    A = random_matrix(rng, p, scale)
    return 0.5 * (A + A.conj().T)


def random_state(rng, p, rank=None):
    rank = p if rank is None else rank
    G = random_matrix(rng, p)[:, :rank]
    R = G @ G.conj().T
    return R / np.trace(R).real


def random_model(rng, p, n_lindblad=1, eta=None, detection="homodyne"):
    eta = rng.uniform(0.3, 1.0) if eta is None else eta
    return QsdeModel.create(random_hermitian(rng, p),
                            [random_matrix(rng, p, 0.6) for _ in range(n_lindblad)],
                            eta, detection)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def example_model():
    """H = 0, L1 = F/2 with F = diag(1, 2): non-observable, diagonal pure states are fixed points."""
    return QsdeModel.create(np.zeros((2, 2)), [np.diag([1.0, 2.0]) / 2], 1.0, "homodyne")


@pytest.fixture
def qubit_model():
    """L1 = sigma_z, H = sigma_x + sigma_z: observable."""
    return QsdeModel.create(matops.PAULI_X + matops.PAULI_Z, [matops.PAULI_Z], 1.0, "homodyne")


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report(capsys):
    """Record one pass/fail line per acceptance criterion and echo it."""
    def report(number, title, passed, detail):
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return passed
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
