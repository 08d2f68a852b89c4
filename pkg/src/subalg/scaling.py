"""Sinkhorn-type iterations.

* ``sinkhorn_unital``: U <- Pol(U^Gamma) until U^Gamma is unitary up to eps.
* ``sinkhorn_qls``: alternate polar normalization of the rows and columns of
  an n x n grid of vectors in C^n, aiming at a quantum Latin square.
* ``sinkhorn_blocks``: alternate congruence normalization of block rows and
  block columns of a matrix of positive definite blocks.
"""

from __future__ import annotations

import dataclasses
import time

import numpy as np

from . import _kernels
from .config import NotPositiveDefinite
from .matcore import as_generator, random_unit_vectors

STALL_WINDOW = 50
STALL_RTOL = 1e-14


@dataclasses.dataclass
class ScaleTrace:
    iterations: int
    defect_history: np.ndarray
    converged: bool
    elapsed: float
    f_history: np.ndarray | None = None
    stalled: bool = False
    degenerate_polar: int = 0
    min_eigenvalues: np.ndarray | None = None

    def rows(self):
        """(iter, defect, logF) tuples; logF is None where not recorded."""
        out = []
        for t, d in enumerate(self.defect_history):
            f = None
            if self.f_history is not None and t >= 1:
                f = float(self.f_history[t - 1])
            out.append((t, float(d), f))
        return out


@dataclasses.dataclass
class QLSGrid:
    """n x n grid of unit vectors in C^n; ``vectors[i, j]`` is x_ij."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        if v.ndim != 3 or not (v.shape[0] == v.shape[1] == v.shape[2]):
            raise ValueError(f"expected an (n, n, n) array, got {v.shape}")
        norms = np.linalg.norm(v, axis=-1)
        if np.max(np.abs(norms - 1)) > 1e-12:
            raise ValueError("grid vectors must have unit norm")
        self.vectors = v

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    def row_matrix(self, i: int) -> np.ndarray:
        return self.vectors[i].T

    def col_matrix(self, j: int) -> np.ndarray:
        return self.vectors[:, j].T


def random_qls_grid(n: int, rng) -> QLSGrid:
    return QLSGrid(random_unit_vectors((n, n), n, rng))


def shifted_basis_grid(n: int) -> QLSGrid:
    """Classical Latin square x_ij = e_{(i+j) mod n}."""
    eye = np.eye(n, dtype=complex)
    return QLSGrid(np.array([[eye[(i + j) % n] for j in range(n)] for i in range(n)]))


def qls_defect(g: QLSGrid) -> float:
    """sqrt(sum_i ||R_i R_i* - I||_F^2 + sum_j ||C_j C_j* - I||_F^2)."""
    return _kernels._numpy.qls_defect(g.vectors)


def sinkhorn_qls(g0: QLSGrid, eps: float, max_iter: int = 100_000, backend: str | None = None):
    if eps <= 0:
        raise ValueError("eps must be positive")
    kern = _kernels.get(backend)
    t0 = time.perf_counter()
    x, hist, it, status, degenerate = kern.qls_loop(np.ascontiguousarray(g0.vectors), float(eps), int(max_iter))
    trace = ScaleTrace(int(it), hist, status == kern.STATUS_CONVERGED, time.perf_counter() - t0,
                       degenerate_polar=int(degenerate))
    return QLSGrid(x), trace


def unital_defect(u: np.ndarray, n: int, k: int, norm: str = "fro") -> float:
    """||U^Gamma (U^Gamma)* - I|| in the Frobenius (default) or operator norm."""
    return float(_kernels._numpy.unital_defect(np.asarray(u, dtype=complex), n, k, _op_flag(norm)))


def _op_flag(norm: str) -> bool:
    if norm not in ("fro", "op"):
        raise ValueError("norm must be 'fro' or 'op'")
    return norm == "op"


def sinkhorn_unital(u0: np.ndarray, n: int, k: int, eps: float, max_iter: int = 100_000,
                    norm: str = "fro", backend: str | None = None):
    """Iterate U <- Pol(U^Gamma) until ||U^Gamma (U^Gamma)* - I|| <= eps.

    A run whose best defect has not improved by a relative 1e-14 within the last
    50 steps is reported as stalled (converged=False).  This catches fixed points
    U = Pol(U^Gamma) outside U_unital as well as an eps below the round-off floor.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    kern = _kernels.get(backend)
    t0 = time.perf_counter()
    u, hist, it, status, degenerate = kern.unital_loop(
        np.ascontiguousarray(u0, dtype=complex), int(n), int(k), float(eps), int(max_iter),
        _op_flag(norm), STALL_WINDOW, STALL_RTOL,
    )
    trace = ScaleTrace(int(it), hist, status == kern.STATUS_CONVERGED, time.perf_counter() - t0,
                       stalled=status == kern.STATUS_STALLED, degenerate_polar=int(degenerate))
    return u, trace


@dataclasses.dataclass
class BlockPSDMatrix:
    """n x n grid of Hermitian positive definite k x k blocks, ``blocks[i, j]`` = X_ij."""

    blocks: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=complex)
        if b.ndim != 4 or b.shape[0] != b.shape[1] or b.shape[2] != b.shape[3]:
            raise ValueError(f"expected an (n, n, k, k) array, got {b.shape}")
        herm = np.max(np.abs(b - np.conj(np.swapaxes(b, -1, -2))))
        if herm > 1e-10 * max(1.0, float(np.max(np.abs(b)))):
            raise NotPositiveDefinite("blocks must be Hermitian")
        w = np.linalg.eigvalsh((b + np.conj(np.swapaxes(b, -1, -2))) / 2)
        if np.min(w) <= 0:
            raise NotPositiveDefinite(f"block with eigenvalue {np.min(w):.3e}; all blocks must be positive definite")
        self.blocks = b

    @property
    def n(self) -> int:
        return self.blocks.shape[0]

    @property
    def k(self) -> int:
        return self.blocks.shape[2]

    def log_f(self) -> float:
        """log prod_ij det X_ij."""
        return _kernels._numpy.log_f(self.blocks)


def random_block_psd(n: int, k: int, rng, extra_rank: int = 0) -> BlockPSDMatrix:
    """Independent complex Wishart blocks W W* with W of size k x (k + extra_rank)."""
    gen = as_generator(rng)
    m = k + extra_rank
    g = gen.standard_normal((n, n, k, m)) + 1j * gen.standard_normal((n, n, k, m))
    return BlockPSDMatrix(g @ np.conj(np.swapaxes(g, -1, -2)))


def is_block_bistochastic(x: BlockPSDMatrix, eps: float, norm: str = "op") -> bool:
    return _kernels._numpy.block_defect(x.blocks, _op_flag(norm)) <= eps


def sinkhorn_blocks(x: BlockPSDMatrix, eps: float, max_iter: int = 1_000_000, norm: str = "op",
                    check_every: int = 100, backend: str | None = None):
    """Alternate row and column normalization until eps-block-bistochastic.

    ``f_history[t]`` is log F after the column step of sweep t+1, with
    F = prod_ij det Y_ij.  Block positivity is re-checked every ``check_every``
    sweeps.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    kern = _kernels.get(backend)
    t0 = time.perf_counter()
    y, hist, f_hist, it, status, min_eigs = kern.blocks_loop(
        np.ascontiguousarray(x.blocks), float(eps), int(max_iter), _op_flag(norm), int(check_every)
    )
    if min_eigs.size and np.min(min_eigs) <= 0:
        raise NotPositiveDefinite("a block lost positive definiteness during the iteration")
    trace = ScaleTrace(int(it), hist, status == kern.STATUS_CONVERGED, time.perf_counter() - t0,
                       f_history=f_hist, min_eigenvalues=min_eigs)
    return BlockPSDMatrix(y), trace


def f_upper_bound(n: int, k: int) -> float:
    """Largest value of log F on column-normalized inputs, attained at X_ij = I/n."""
    return -k * n * n * np.log(n)


def steps_to_reach(defect_history: np.ndarray, eps: float) -> int | None:
    """First iteration whose defect is <= eps, or None if never reached."""
    hits = np.flatnonzero(np.asarray(defect_history) <= eps)
    return int(hits[0]) if hits.size else None
