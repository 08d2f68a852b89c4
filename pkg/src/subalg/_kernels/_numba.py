"""numba-compiled versions of the scaling loops.

Same algorithms and return signatures as ``_numpy``; loops are written
explicitly so each small matrix is handled without Python overhead.
"""

import numpy as np
from numba import njit

STATUS_CONVERGED = 0
STATUS_MAX_ITER = 1
STATUS_STALLED = 2


@njit(cache=True)
def _polar(m):
    a, s, bh = np.linalg.svd(m)
    return a @ bh, s[-1] / max(s[0], 1e-300)


@njit(cache=True)
def _herm_norm(d, op_norm):
    if op_norm:
        w = np.linalg.eigvalsh(d)
        return max(abs(w[0]), abs(w[-1]))
    return np.sqrt(np.sum(d.real ** 2 + d.imag ** 2))


@njit(cache=True)
def _partial_transpose(u, n, k):
    g = np.empty_like(u)
    for i in range(n):
        for j in range(n):
            for a in range(k):
                for b in range(k):
                    g[i * k + a, j * k + b] = u[i * k + b, j * k + a]
    return g


@njit(cache=True)
def unital_defect(u, n, k, op_norm):
    g = _partial_transpose(u, n, k)
    d = g @ g.conj().T
    for t in range(n * k):
        d[t, t] -= 1.0
    return _herm_norm(d, op_norm)


@njit(cache=True)
def unital_loop(u, n, k, eps, max_iter, op_norm, stall_window, stall_rtol):
    u = u.copy()
    hist = [unital_defect(u, n, k, op_norm)]
    # running minimum of the defect, for stall detection
    best = [hist[0]]
    degenerate = 0
    status = STATUS_MAX_ITER
    it = 0
    while True:
        if hist[-1] <= eps:
            status = STATUS_CONVERGED
            break
        if it >= max_iter:
            break
        if it >= stall_window:
            if best[-1] >= (1.0 - stall_rtol) * best[len(best) - 1 - stall_window]:
                status = STATUS_STALLED
                break
        u, ratio = _polar(_partial_transpose(u, n, k))
        if ratio < 1e-12:
            degenerate += 1
        it += 1
        hist.append(unital_defect(u, n, k, op_norm))
        best.append(min(best[-1], hist[-1]))
    return u, np.array(hist), it, status, degenerate


@njit(cache=True)
def qls_defect(x):
    n = x.shape[0]
    total = 0.0
    for i in range(n):
        m = np.ascontiguousarray(x[i].T)
        d = m @ m.conj().T
        for t in range(n):
            d[t, t] -= 1.0
        total += np.sum(d.real ** 2 + d.imag ** 2)
    for j in range(n):
        m = np.ascontiguousarray(x[:, j, :].T)
        d = m @ m.conj().T
        for t in range(n):
            d[t, t] -= 1.0
        total += np.sum(d.real ** 2 + d.imag ** 2)
    return np.sqrt(total)


@njit(cache=True)
def qls_loop(x, eps, max_iter):
    n = x.shape[0]
    x = x.copy()
    hist = [qls_defect(x)]
    degenerate = 0
    status = STATUS_MAX_ITER
    it = 0
    while True:
        if hist[-1] <= eps:
            status = STATUS_CONVERGED
            break
        if it >= max_iter:
            break
        for i in range(n):
            p, ratio = _polar(np.ascontiguousarray(x[i].T))
            if ratio < 1e-12:
                degenerate += 1
            for j in range(n):
                x[i, j, :] = p[:, j]
        for j in range(n):
            p, ratio = _polar(np.ascontiguousarray(x[:, j, :].T))
            if ratio < 1e-12:
                degenerate += 1
            for i in range(n):
                x[i, j, :] = p[:, i]
        it += 1
        hist.append(qls_defect(x))
    return x, np.array(hist), it, status, degenerate


@njit(cache=True)
def _inv_sqrt(s):
    w, v = np.linalg.eigh(s)
    scaled = v.copy()
    for c in range(w.shape[0]):
        scaled[:, c] = v[:, c] / np.sqrt(w[c])
    return scaled @ v.conj().T


@njit(cache=True)
def _hermitize(m):
    return (m + m.conj().T) / 2


@njit(cache=True)
def block_defect(y, op_norm):
    n = y.shape[0]
    k = y.shape[2]
    worst = 0.0
    for i in range(n):
        row = np.eye(k).astype(np.complex128)
        col = np.eye(k).astype(np.complex128)
        for j in range(n):
            row -= y[i, j]
            col -= y[j, i]
        worst = max(worst, _herm_norm(row, op_norm), _herm_norm(col, op_norm))
    return worst


@njit(cache=True)
def log_f(y):
    n = y.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += np.sum(np.log(np.linalg.eigvalsh(y[i, j])))
    return total


@njit(cache=True)
def min_block_eig(y):
    n = y.shape[0]
    worst = np.inf
    for i in range(n):
        for j in range(n):
            worst = min(worst, np.linalg.eigvalsh(y[i, j])[0])
    return worst


@njit(cache=True)
def blocks_loop(y, eps, max_iter, op_norm, check_every):
    n = y.shape[0]
    k = y.shape[2]
    y = y.copy()
    for i in range(n):
        for j in range(n):
            y[i, j] = _hermitize(y[i, j])
    hist = [block_defect(y, op_norm)]
    f_hist = [0.0]
    f_hist.pop()
    min_eigs = [0.0]
    min_eigs.pop()
    status = STATUS_MAX_ITER
    it = 0
    while True:
        if hist[-1] <= eps:
            status = STATUS_CONVERGED
            break
        if it >= max_iter:
            break
        for i in range(n):
            s = np.zeros((k, k), dtype=np.complex128)
            for j in range(n):
                s += y[i, j]
            q = _inv_sqrt(_hermitize(s))
            for j in range(n):
                y[i, j] = _hermitize(q @ y[i, j] @ q)
        for j in range(n):
            s = np.zeros((k, k), dtype=np.complex128)
            for i in range(n):
                s += y[i, j]
            q = _inv_sqrt(_hermitize(s))
            for i in range(n):
                y[i, j] = _hermitize(q @ y[i, j] @ q)
        it += 1
        f_hist.append(log_f(y))
        hist.append(block_defect(y, op_norm))
        if it % check_every == 0:
            min_eigs.append(min_block_eig(y))
    return y, np.array(hist), np.array(f_hist), it, status, np.array(min_eigs)
