import numpy as np
import pytest

W_STAR = np.array([0.332, -0.040, -0.094, 0.717, -0.652, -0.072, 0.580])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(M, rng, trace=None):
    V, _ = np.linalg.qr(rng.standard_normal((M, M)))
    lam = rng.uniform(0.1, 1.0, M)
    if trace is not None:
        lam *= trace / lam.sum()
    return (V * lam) @ V.T


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
