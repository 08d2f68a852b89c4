"""Partial isometries, subspace partitions and block type classification."""

from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from .config import DEFAULT, DimensionMismatch, Tolerances
from .matcore import Subspace, blocks, ragged_slices, unitarity_residual


@dataclasses.dataclass(frozen=True)
class IsometryReport:
    is_partial_isometry: bool
    rank: int
    initial: Subspace
    final: Subspace
    residual: float

    def as_dict(self) -> dict:
        return {
            "partial_isometry": self.is_partial_isometry,
            "rank": self.rank,
            "residual": self.residual,
        }


@dataclasses.dataclass(frozen=True)
class TypeFlags:
    c1: bool = False
    c2: bool = False
    c3: bool = False
    c4: bool = False

    def as_dict(self) -> dict[str, bool]:
        return dataclasses.asdict(self)


def pi_residual(r: np.ndarray) -> float:
    """Frobenius norm of R - R R* R."""
    return float(np.linalg.norm(r - r @ r.conj().T @ r))


def analyze_block(r: np.ndarray, scale: float | None = None, tol: Tolerances = DEFAULT) -> IsometryReport:
    """Partial-isometry verdict plus initial/final spaces of ``r``.

    ``scale`` is the singular value the rank threshold is relative to; pass the
    largest singular value of the enclosing matrix when ``r`` is one of its blocks.
    """
    r = np.asarray(r, dtype=complex)
    u, s, vh = np.linalg.svd(r)
    if scale is None:
        scale = max(s[0] if s.size else 0.0, 1.0)
    rank = int(np.sum(s > tol.rank_rel * scale))
    residual = pi_residual(r)
    initial = Subspace(r.shape[1], vh[:rank].conj().T)
    final = Subspace(r.shape[0], u[:, :rank])
    return IsometryReport(residual <= tol.iso, rank, initial, final, residual)


def is_partition(subspaces: Sequence[Subspace], ambient_dim: int, tol: Tolerances = DEFAULT) -> bool:
    if any(s.ambient_dim != ambient_dim for s in subspaces):
        raise DimensionMismatch("subspaces do not share the ambient dimension")
    if sum(s.dim for s in subspaces) != ambient_dim:
        return False
    for a in range(len(subspaces)):
        for b in range(a + 1, len(subspaces)):
            overlap = subspaces[a].basis.conj().T @ subspaces[b].basis
            if overlap.size and np.linalg.norm(overlap) > tol.ortho:
                return False
    return True


def classify_type(u: np.ndarray, n: int, k: int, tol: Tolerances = DEFAULT):
    """Block reports and (C1)-(C4) flags of an nk x nk matrix.

    Flags are only evaluated when every block is a partial isometry; otherwise
    all four are False and the reports show which blocks failed.
    """
    u = np.asarray(u, dtype=complex)
    b = blocks(u, n, k)
    scale = float(np.linalg.norm(u, 2))
    reports = [[analyze_block(b[i, j], scale, tol) for j in range(n)] for i in range(n)]
    if not all(rep.is_partial_isometry for row in reports for rep in row):
        return reports, TypeFlags()
    flags = TypeFlags(
        c1=all(is_partition([reports[i][j].initial for j in range(n)], k, tol) for i in range(n)),
        c2=all(is_partition([reports[i][j].final for j in range(n)], k, tol) for i in range(n)),
        c3=all(is_partition([reports[i][j].initial for i in range(n)], k, tol) for j in range(n)),
        c4=all(is_partition([reports[i][j].final for i in range(n)], k, tol) for j in range(n)),
    )
    return reports, flags


def verify_report(u: np.ndarray, n: int, k: int, tol: Tolerances = DEFAULT) -> dict:
    """JSON-ready structural report used by the ``verify`` command."""
    reports, flags = classify_type(u, n, k, tol)
    return {
        "blocks": [[{"rank": rep.rank, "residual": rep.residual} for rep in row] for row in reports],
        "flags": flags.as_dict(),
        "unitary_residual": unitarity_residual(u),
    }


@dataclasses.dataclass(frozen=True)
class CochranResult:
    sum_ok: bool
    rank_sum: int
    equality_case: bool
    all_partial_isometries: bool
    initial_partition: bool


def _family_scale(a: Sequence[np.ndarray]) -> float:
    return max([1.0] + [float(np.linalg.norm(x, 2)) for x in a])


def check_cochran(a: Sequence[np.ndarray], k: int, tol: Tolerances = DEFAULT) -> CochranResult:
    """Cochran's rank inequality for a family with sum A_i* A_i = I."""
    a = [np.asarray(x, dtype=complex) for x in a]
    if any(x.shape != (k, k) for x in a):
        raise DimensionMismatch(f"every operator must be {k}x{k}")
    total = sum(x.conj().T @ x for x in a)
    sum_ok = bool(np.linalg.norm(total - np.eye(k)) <= tol.iso)
    scale = _family_scale(a)
    reports = [analyze_block(x, scale, tol) for x in a]
    rank_sum = sum(rep.rank for rep in reports)
    all_pi = all(rep.is_partial_isometry for rep in reports)
    partition = is_partition([rep.initial for rep in reports], k, tol)
    return CochranResult(sum_ok, rank_sum, sum_ok and rank_sum == k, all_pi, partition)


def check_mutual_annihilation(a: Sequence[np.ndarray], tol: Tolerances = DEFAULT) -> bool:
    """True iff A_i* A_j vanishes for every i != j."""
    a = [np.asarray(x, dtype=complex) for x in a]
    worst = 0.0
    for i in range(len(a)):
        for j in range(len(a)):
            if i != j:
                worst = max(worst, float(np.linalg.norm(a[i].conj().T @ a[j])))
    return worst <= tol.iso


# -- coarse blocks (block-diagonal algebras) ---------------------------------

def tensor_factor(space: Subspace, d: int, k: int, tol: Tolerances = DEFAULT):
    """Test whether ``space`` (inside C^d (x) C^k) equals C^d (x) F_hat.

    Returns ``(F_hat, defect)`` where defect is ||P_F - I_d (x) P_Fhat||_F.
    """
    p = space.projector().reshape(d, k, d, k)
    q = np.einsum("xaxb->ab", p) / d
    w, v = np.linalg.eigh((q + q.conj().T) / 2)
    f_hat = Subspace(k, v[:, w > 0.5])
    defect = float(np.linalg.norm(space.projector() - np.kron(np.eye(d), f_hat.projector())))
    return f_hat, defect


@dataclasses.dataclass
class BlockTypeReport:
    """Structural verdict for the coarse block decomposition of U."""

    reports: list
    f_hat: list
    tensor_defect: float
    all_partial_isometries: bool
    final_rows_partition: bool
    initial_cols_partition: bool
    final_cols_partition: bool

    @property
    def heisenberg(self) -> bool:
        return (self.all_partial_isometries and self.final_rows_partition
                and self.initial_cols_partition)

    @property
    def schrodinger(self) -> bool:
        return self.heisenberg and self.final_cols_partition


def classify_block_type(u: np.ndarray, dims: Sequence[int], k: int, tol: Tolerances = DEFAULT) -> BlockTypeReport:
    """Check the coarse-block conditions for the algebra of block sizes ``dims``.

    Heisenberg: every U_ab is a partial isometry, F_ab = V_a (x) F_hat_ab with
    {F_hat_ab}_b a partition of C^k, and {E_ab}_a a partition of V_b (x) C^k.
    Schrodinger adds: {F_hat_ab}_a a partition of C^k for every b.
    """
    u = np.asarray(u, dtype=complex)
    dims = list(dims)
    big_n = len(dims)
    sl = ragged_slices(dims, k)
    scale = float(np.linalg.norm(u, 2))
    reports = [[analyze_block(u[sl[a], sl[b]], scale, tol) for b in range(big_n)] for a in range(big_n)]
    all_pi = all(rep.is_partial_isometry for row in reports for rep in row)
    f_hat = [[None] * big_n for _ in range(big_n)]
    worst = 0.0
    for a in range(big_n):
        for b in range(big_n):
            fh, defect = tensor_factor(reports[a][b].final, dims[a], k, tol)
            f_hat[a][b] = fh
            worst = max(worst, defect)
    structured = all_pi and worst <= tol.iso
    rows = structured and all(is_partition([f_hat[a][b] for b in range(big_n)], k, tol) for a in range(big_n))
    cols_e = all_pi and all(
        is_partition([reports[a][b].initial for a in range(big_n)], dims[b] * k, tol) for b in range(big_n)
    )
    cols_f = structured and all(is_partition([f_hat[a][b] for a in range(big_n)], k, tol) for b in range(big_n))
    return BlockTypeReport(reports, f_hat, worst, all_pi, rows, cols_e, cols_f)
