import sys

import numpy as np
import pytest


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance and acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(acceptance.LINES):
            terminalreporter.write_line(acceptance.LINES[n])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_matrix(rng, d):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


def random_hermitian(rng, d):
    A = random_matrix(rng, d)
    return (A + A.conj().T) / 2
