import numpy as np
import pytest

from specdyn.delta import DeltaNet


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


class LinearField:
    """Hand-built vector field ``X -> A @ X`` for integrator oracles."""

    def __init__(self, A):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))

    def __call__(self, X):
        return np.asarray(X) @ self.A.T


def random_delta(rng, L, b, scale=0.7):
    return DeltaNet(rng.normal(0, scale, (b, 2 * L)), rng.normal(0, scale, b),
                    rng.normal(0, scale, (2 * L, b)), rng.normal(0, scale, 2 * L))


def zero_delta(L, b):
    return DeltaNet(np.zeros((b, 2 * L)), np.zeros(b), np.zeros((2 * L, b)), np.zeros(2 * L))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
