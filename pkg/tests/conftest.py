import numpy as np
import pytest
import scipy.linalg


def loop_partial_trace(m, n, k):
    out = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            out[i, j] = sum(m[i * k + a, j * k + a] for a in range(k))
    return out


def kraus_T(u, beta, n, k):
    """Kraus operators of X -> Tr_k[U (X (x) beta) U*], built from sqrt(beta)."""
    root = scipy.linalg.sqrtm(beta)
    eye_k = np.eye(k)
    ops = []
    for a in range(k):
        bra = np.kron(np.eye(n), eye_k[a][None, :])
        for b in range(k):
            ket = np.kron(np.eye(n), root[:, b][:, None])
            ops.append(bra @ u @ ket)
    return ops


def oracle_T(u, beta, x, n, k):
    return sum(K @ x @ K.conj().T for K in kraus_T(u, beta, n, k))


def oracle_S(u, beta, x, n, k):
    return sum(K.conj().T @ x @ K for K in kraus_T(u, beta, n, k))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
