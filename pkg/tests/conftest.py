"""Shared fixtures: deterministic generators and random-state factories."""

import numpy as np
import pytest

from steanesim import DensityMatrix, PureState

# verdict lines queued by the acceptance tests; echoed at the end of the
# terminal run so every criterion shows one pass/fail line
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def criterion_report():
    def report(label: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line, flush=True)

    return report


@pytest.fixture
def rng():
    """Fresh seeded generator per test; tests stay order-independent."""
    return np.random.default_rng(20260822)


@pytest.fixture
def random_pure(rng):
    def make(n):
        vec = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
        return PureState(vec / np.linalg.norm(vec), n)

    return make


@pytest.fixture
def random_mixed(rng):
    def make(n, rank=3):
        dim = 2**n
        weights = rng.random(rank)
        weights /= weights.sum()
        mat = np.zeros((dim, dim), dtype=complex)
        for w in weights:
            v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
            v /= np.linalg.norm(v)
            mat += w * np.outer(v, v.conj())
        return DensityMatrix(mat, n)

    return make
