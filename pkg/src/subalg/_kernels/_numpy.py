"""Vectorized numpy implementations of the scaling loops."""

import numpy as np

STATUS_CONVERGED = 0
STATUS_MAX_ITER = 1
STATUS_STALLED = 2


def _polar_batch(m):
    a, _, bh = np.linalg.svd(m)
    return a @ bh


def _smallest_sv_ratio(m):
    s = np.linalg.svd(m, compute_uv=False)
    return s[..., -1] / np.maximum(s[..., 0], 1e-300)


def _deviation_norm(d, op_norm):
    # d is Hermitian with shape (..., m, m)
    if op_norm:
        return np.max(np.abs(np.linalg.eigvalsh(d)), axis=-1)
    return np.sqrt(np.sum(np.abs(d) ** 2, axis=(-2, -1)))


def unital_defect(u, n, k, op_norm):
    g = u.reshape(n, k, n, k).transpose(0, 3, 2, 1).reshape(n * k, n * k)
    d = g @ g.conj().T - np.eye(n * k)
    return float(_deviation_norm(d, op_norm))


def unital_loop(u, n, k, eps, max_iter, op_norm, stall_window, stall_rtol):
    u = u.copy()
    nk = n * k
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
            if best[-1] >= (1.0 - stall_rtol) * best[-1 - stall_window]:
                status = STATUS_STALLED
                break
        g = u.reshape(n, k, n, k).transpose(0, 3, 2, 1).reshape(nk, nk)
        if _smallest_sv_ratio(g) < 1e-12:
            degenerate += 1
        u = _polar_batch(g)
        it += 1
        hist.append(unital_defect(u, n, k, op_norm))
        best.append(min(best[-1], hist[-1]))
    return u, np.array(hist), it, status, degenerate


def qls_defect(x):
    # x[i, j] is the vector x_ij; R_i has columns x_ij (over j), C_j has columns x_ij (over i)
    n = x.shape[0]
    eye = np.eye(n)
    rows = np.einsum("ija,ijb->iab", x, x.conj()) - eye
    cols = np.einsum("ija,ijb->jab", x, x.conj()) - eye
    return float(np.sqrt(np.sum(np.abs(rows) ** 2) + np.sum(np.abs(cols) ** 2)))


def qls_loop(x, eps, max_iter):
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
        # rows: R_i as a matrix with columns x_ij -> array [i, a, j]
        r = x.transpose(0, 2, 1)
        degenerate += int(np.sum(_smallest_sv_ratio(r) < 1e-12))
        y = _polar_batch(r).transpose(0, 2, 1)
        # columns: C_j with columns y_ij -> array [j, a, i]
        c = y.transpose(1, 2, 0)
        degenerate += int(np.sum(_smallest_sv_ratio(c) < 1e-12))
        x = _polar_batch(c).transpose(2, 0, 1)
        it += 1
        hist.append(qls_defect(x))
    return x, np.array(hist), it, status, degenerate


def _inv_sqrt_batch(s):
    w, v = np.linalg.eigh(s)
    return (v / np.sqrt(w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def _hermitize(y):
    return (y + np.conj(np.swapaxes(y, -1, -2))) / 2


def block_defect(y, op_norm):
    k = y.shape[-1]
    eye = np.eye(k)
    rows = eye - y.sum(axis=1)
    cols = eye - y.sum(axis=0)
    return float(max(np.max(_deviation_norm(rows, op_norm)), np.max(_deviation_norm(cols, op_norm))))


def log_f(y):
    return float(np.sum(np.log(np.linalg.eigvalsh(y))))


def min_block_eig(y):
    return float(np.min(np.linalg.eigvalsh(y)))


def blocks_loop(y, eps, max_iter, op_norm, check_every):
    y = _hermitize(y.copy())
    hist = [block_defect(y, op_norm)]
    f_hist = []
    min_eigs = []
    status = STATUS_MAX_ITER
    it = 0
    while True:
        if hist[-1] <= eps:
            status = STATUS_CONVERGED
            break
        if it >= max_iter:
            break
        q = _inv_sqrt_batch(_hermitize(y.sum(axis=1)))
        y = _hermitize(q[:, None] @ y @ q[:, None])
        q = _inv_sqrt_batch(_hermitize(y.sum(axis=0)))
        y = _hermitize(q[None, :] @ y @ q[None, :])
        it += 1
        f_hist.append(log_f(y))
        hist.append(block_defect(y, op_norm))
        if it % check_every == 0:
            min_eigs.append(min_block_eig(y))
    return y, np.array(hist), np.array(f_hist), it, status, np.array(min_eigs)
