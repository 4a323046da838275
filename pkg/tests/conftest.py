import itertools

import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile("ci", deadline=None, max_examples=50)
hypothesis.settings.load_profile("ci")


def kron_power(n: int) -> np.ndarray:
    """F^{(x)n} with F = [[1, 0], [1, 1]], built directly from Kronecker products."""
    F = np.array([[1, 0], [1, 1]], dtype=np.int64)
    G = np.array([[1]], dtype=np.int64)
    for _ in range(n):
        G = np.kron(G, F)
    return G


def gf2_encode(u, a) -> np.ndarray:
    """Reference encoder: information rows of the generator, multiplied over GF(2)."""
    a = np.asarray(a, dtype=bool)
    G = kron_power(a.size.bit_length() - 1)[a]
    return (np.asarray(u, dtype=np.int64) @ G) % 2


def all_masks(N: int):
    """Every nonempty A-vector of length N."""
    for bits in itertools.product((False, True), repeat=N):
        if any(bits):
            yield np.array(bits)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one (criterion, passed, detail) entry per acceptance criterion, echoed after the run
ACCEPTANCE: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
