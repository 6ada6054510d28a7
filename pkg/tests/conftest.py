import numpy as np
import pytest

ACCEPTANCE_LINES = []


def random_rotation(p, rng):
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    return Q * np.sign(np.diag(R))


def random_psd(p, rank, rng, spread=1.0):
    """PSD matrix of exact rank ``rank`` with random eigenbasis and log-spread spectrum."""
    U = random_rotation(p, rng)[:, :rank]
    w = np.exp(spread * rng.standard_normal(rank))
    A = (U * w) @ U.T
    return 0.5 * (A + A.T)


def rel_fro(A, B):
    return np.linalg.norm(A - B) / max(np.linalg.norm(B), 1e-300)


def penrose_residuals(A, Ap):
    """Relative residuals of the four Moore-Penrose conditions."""
    return (
        rel_fro(A @ Ap @ A, A),
        rel_fro(Ap @ A @ Ap, Ap),
        rel_fro((A @ Ap).T, A @ Ap),
        rel_fro((Ap @ A).T, Ap @ A),
    )


CASES = ("i", "ii", "iii", "iv", "v")


def draw_case_dims(case, rng, max_p=12):
    """Random (p, n, r) in one of the five invertibility regimes."""
    integers = lambda lo, hi: int(rng.integers(lo, hi + 1))
    if case == "i":  # n < r = p
        p = integers(2, max_p)
        return p, integers(1, p - 1), p
    if case == "ii":  # r = p <= n
        p = integers(1, max_p)
        return p, integers(p, p + 10), p
    if case == "iii":  # r < p <= n
        p = integers(2, max_p)
        return p, integers(p, p + 10), integers(1, p - 1)
    if case == "iv":  # r <= n < p
        p = integers(2, max_p)
        n = integers(1, p - 1)
        return p, n, integers(1, n)
    if case == "v":  # n < r < p
        p = integers(3, max_p)
        r = integers(2, p - 1)
        return p, integers(1, r - 1), r
    raise ValueError(case)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
