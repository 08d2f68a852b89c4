"""Constructors for structured bipartite unitaries and worked examples with known verdicts."""

from __future__ import annotations

import dataclasses
import itertools
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .config import InvalidPattern, PatternNotRealizable
from .matcore import (
    as_generator,
    embed,
    flip,
    haar_unitary,
    partial_transpose,
    swap_matrix,
    ragged_slices,
)


@dataclasses.dataclass(frozen=True)
class PatternMatrix:
    """Block-rank pattern: nonnegative integers with every row and column summing to k."""

    n: int
    k: int
    delta: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.delta)
        if d.shape != (self.n, self.n):
            raise InvalidPattern(f"delta must be {self.n}x{self.n}, got {d.shape}")
        if np.any(d < 0) or not np.all(d == np.round(d)):
            raise InvalidPattern("delta must hold nonnegative integers")
        if np.any(d.sum(axis=1) != self.k) or np.any(d.sum(axis=0) != self.k):
            raise InvalidPattern(f"every row and column of delta must sum to k={self.k}")
        object.__setattr__(self, "delta", d.astype(int))


@dataclasses.dataclass(frozen=True)
class BlockPattern:
    """Pattern for a block-diagonal algebra with block sizes ``dims``.

    delta[a, b] is dim F_hat_ab, so that rank U_ab = dims[a] * delta[a, b].
    """

    dims: tuple
    k: int
    delta: np.ndarray

    def __post_init__(self):
        dims = np.asarray(self.dims, dtype=int)
        d = np.asarray(self.delta)
        big_n = len(dims)
        if d.shape != (big_n, big_n):
            raise InvalidPattern(f"delta must be {big_n}x{big_n}")
        if np.any(dims < 1):
            raise InvalidPattern("block sizes must be positive")
        if np.any(d < 0) or not np.all(d == np.round(d)):
            raise InvalidPattern("delta must hold nonnegative integers")
        if np.any(d.sum(axis=1) != self.k):
            raise InvalidPattern("every row of delta must sum to k")
        if np.any(dims @ d != dims * self.k):
            raise InvalidPattern("column dimension budget sum_a d_a delta_ab = d_b k violated")
        object.__setattr__(self, "dims", tuple(int(x) for x in dims))
        object.__setattr__(self, "delta", d.astype(int))

    @property
    def big_n(self) -> int:
        return len(self.dims)

    @property
    def schrodinger_realizable(self) -> bool:
        return bool(np.all(self.delta.sum(axis=0) == self.k))


def random_pattern(n: int, k: int, rng, canonical: bool = False) -> PatternMatrix:
    """Sum of k independent uniform permutation matrices (all ones when canonical and n == k)."""
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    if canonical:
        if n != k:
            raise InvalidPattern("the canonical all-ones pattern needs n == k")
        return PatternMatrix(n, k, np.ones((n, n), dtype=int))
    gen = as_generator(rng)
    delta = np.zeros((n, n), dtype=int)
    for _ in range(k):
        delta[np.arange(n), gen.permutation(n)] += 1
    return PatternMatrix(n, k, delta)


def birkhoff_permutations(delta: np.ndarray) -> list[np.ndarray]:
    """Write an integer matrix with constant row/column sums as a sum of permutations.

    Returns ``perms`` with ``delta = sum_t P_t`` and ``P_t[i, perms[t][i]] = 1``.
    """
    rest = np.array(delta, dtype=int)
    n = rest.shape[0]
    total = int(rest[0].sum()) if n else 0
    perms = []
    for _ in range(total):
        # perfect matching inside the support exists by Konig's theorem
        rows, cols = linear_sum_assignment(-(rest > 0).astype(float))
        if np.any(rest[rows, cols] <= 0):
            raise InvalidPattern("matrix does not have constant row and column sums")
        perm = np.empty(n, dtype=int)
        perm[rows] = cols
        rest[rows, cols] -= 1
        perms.append(perm)
    return perms


def _offsets_in_column(delta: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    # offs[i, j] = sum_{t<i} w_t delta[t, j]
    w = np.ones(delta.shape[0], dtype=int) if weights is None else weights
    weighted = delta * w[:, None]
    return np.cumsum(weighted, axis=0) - weighted


def _offsets_in_row(delta: np.ndarray) -> np.ndarray:
    return np.cumsum(delta, axis=1) - delta


def _pattern_factors(p: PatternMatrix, gen: np.random.Generator):
    n, k = p.n, p.k
    r_mats = [haar_unitary(k, gen) for _ in range(n)]
    c_mats = [haar_unitary(k, gen) for _ in range(n)]
    return r_mats, c_mats


def _assemble(n: int, k: int, e_bases, f_bases) -> np.ndarray:
    u = np.zeros((n * k, n * k), dtype=complex)
    for i in range(n):
        for j in range(n):
            u[i * k:(i + 1) * k, j * k:(j + 1) * k] = f_bases[i][j] @ e_bases[i][j].conj().T
    return u


def _initial_bases(p: PatternMatrix, c_mats):
    offs = _offsets_in_column(p.delta)
    return [[c_mats[j][:, offs[i, j]:offs[i, j] + p.delta[i, j]] for j in range(p.n)] for i in range(p.n)]


def generate_pattern_unitary(p: PatternMatrix, rng, return_witness: bool = False):
    """Random unitary of type (C2),(C3) whose block ranks are ``p.delta``.

    E_ij is spanned by consecutive columns of C_j and F_ij by consecutive
    columns of R_i, with R_1..R_n, C_1..C_n independent Haar unitaries; U_ij
    sends the s-th E column to the s-th F column.
    """
    if not isinstance(p, PatternMatrix):
        raise InvalidPattern("expected a PatternMatrix")
    gen = as_generator(rng)
    n = p.n
    r_mats, c_mats = _pattern_factors(p, gen)
    row_offs = _offsets_in_row(p.delta)
    e_bases = _initial_bases(p, c_mats)
    f_bases = [[r_mats[i][:, row_offs[i, j]:row_offs[i, j] + p.delta[i, j]] for j in range(n)] for i in range(n)]
    u = _assemble(n, p.k, e_bases, f_bases)
    if return_witness:
        return u, {"delta": p.delta, "R": r_mats, "C": c_mats}
    return u


def generate_schrodinger_diag_unitary(p: PatternMatrix, rng, method: str = "latin", eps: float = 1e-13,
                                      max_iter: int = 100_000, return_witness: bool = False):
    """Random unitary of type (C2),(C3),(C4) with block ranks ``p.delta``.

    ``method="latin"``: write delta as a sum of k permutations sigma_t and give
    column t of a Haar unitary D to the final space of block (i, sigma_t(i)).
    For delta = all ones this is a classical Latin square.
    ``method="qls"`` (n == k, delta all ones): final spaces are the lines of a
    quantum Latin square produced by the non-commutative Sinkhorn iteration.
    """
    from .scaling import random_qls_grid, sinkhorn_qls

    gen = as_generator(rng)
    n, k = p.n, p.k
    r_mats, c_mats = _pattern_factors(p, gen)
    e_bases = _initial_bases(p, c_mats)
    witness = {"delta": p.delta, "C": c_mats}
    if method == "latin":
        d_mat = haar_unitary(k, gen)
        perms = birkhoff_permutations(p.delta)
        f_cols = [[[] for _ in range(n)] for _ in range(n)]
        for t, perm in enumerate(perms):
            for i in range(n):
                f_cols[i][perm[i]].append(t)
        f_bases = [[d_mat[:, f_cols[i][j]] for j in range(n)] for i in range(n)]
        witness.update(D=d_mat, latin=np.array([[f_cols[i][j] for j in range(n)] for i in range(n)], dtype=object))
    elif method == "qls":
        if n != k or np.any(p.delta != 1):
            raise PatternNotRealizable("the QLS construction needs n == k and delta identically 1")
        grid, trace = sinkhorn_qls(random_qls_grid(n, gen), eps, max_iter)
        if not trace.converged:
            raise PatternNotRealizable(
                f"QLS iteration stopped at defect {trace.defect_history[-1]:.3e} after {trace.iterations} steps"
            )
        f_bases = [[grid.vectors[i, j][:, None] for j in range(n)] for i in range(n)]
        witness.update(qls=grid.vectors, qls_iterations=trace.iterations)
    else:
        raise ValueError(f"unknown method {method!r}")
    u = _assemble(n, k, e_bases, f_bases)
    return (u, witness) if return_witness else u


# -- block-diagonal algebras --------------------------------------------------

def feasible_block_patterns(dims: Sequence[int], k: int, schrodinger: bool = False) -> list[np.ndarray]:
    """All patterns compatible with block sizes ``dims`` (small N and k only)."""
    dims = np.asarray(dims, dtype=int)
    big_n = len(dims)
    rows = [np.array(c) for c in itertools.product(range(k + 1), repeat=big_n) if sum(c) == k]
    out = []
    for choice in itertools.product(rows, repeat=big_n):
        d = np.array(choice)
        if np.all(dims @ d == dims * k) and (not schrodinger or np.all(d.sum(axis=0) == k)):
            out.append(d)
    return out


def random_block_pattern(dims: Sequence[int], k: int, rng, picture: str = "H") -> BlockPattern:
    schrodinger = picture.upper() == "S"
    options = feasible_block_patterns(dims, k, schrodinger)
    gen = as_generator(rng)
    return BlockPattern(tuple(dims), k, options[int(gen.integers(len(options)))])


def generate_block_diag_unitary(bp: BlockPattern, picture: str, rng, return_witness: bool = False):
    """Random unitary preserving the block-diagonal algebra with sizes ``bp.dims``.

    U_ab is a partial isometry with final space V_a (x) F_hat_ab and initial
    space carved from a Haar unitary on V_b (x) C^k.  Picture "H": F_hat_ab taken
    row-wise from Haar unitaries on C^k.  Picture "S": F_hat additionally
    partitions C^k down every column.
    """
    picture = picture.upper()
    if picture not in ("H", "S"):
        raise ValueError("picture must be 'H' or 'S'")
    gen = as_generator(rng)
    dims = np.asarray(bp.dims, dtype=int)
    big_n, k, delta = bp.big_n, bp.k, bp.delta
    if picture == "H":
        r_mats = [haar_unitary(k, gen) for _ in range(big_n)]
        row_offs = _offsets_in_row(delta)
        f_hat = [[r_mats[a][:, row_offs[a, b]:row_offs[a, b] + delta[a, b]] for b in range(big_n)]
                 for a in range(big_n)]
        c_mats = [haar_unitary(int(dims[b]) * k, gen) for b in range(big_n)]
        witness = {"R": r_mats}
    else:
        if not bp.schrodinger_realizable:
            raise PatternNotRealizable("Schrodinger picture needs every column of delta to sum to k")
        d_mat = haar_unitary(k, gen)
        cols = [[[] for _ in range(big_n)] for _ in range(big_n)]
        for t, perm in enumerate(birkhoff_permutations(delta)):
            for a in range(big_n):
                cols[a][perm[a]].append(t)
        f_hat = [[d_mat[:, cols[a][b]] for b in range(big_n)] for a in range(big_n)]
        c_mats = [haar_unitary(int(dims[b]) * k, gen) for b in range(big_n)]
        witness = {"D": d_mat}
    col_offs = _offsets_in_column(delta, dims)
    sl = ragged_slices(bp.dims, k)
    size = int(dims.sum()) * k
    u = np.zeros((size, size), dtype=complex)
    for a in range(big_n):
        for b in range(big_n):
            rank = int(dims[a] * delta[a, b])
            e = c_mats[b][:, col_offs[a, b]:col_offs[a, b] + rank]
            f = np.kron(np.eye(dims[a]), f_hat[a][b])
            u[sl[a], sl[b]] = f @ e.conj().T
    if return_witness:
        witness.update(delta=delta, C=c_mats, F_hat=f_hat)
        return u, witness
    return u


# -- tensor product algebras ---------------------------------------------------

def generate_tensor_H(d: int, r: int, k: int, rng, return_witness: bool = False):
    """U = (I_d (x) V)(W (x) I_r) with V in U_rk, W in U_dk Haar; factors ordered C^d, C^r, C^k."""
    gen = as_generator(rng)
    v = haar_unitary(r * k, gen)
    w = haar_unitary(d * k, gen)
    dims = [d, r, k]
    u = embed(v, dims, [1, 2]) @ embed(w, dims, [0, 2])
    return (u, {"V": v, "W": w}) if return_witness else u


def random_unital(r: int, k: int, rng) -> np.ndarray:
    """Exact element of U_rk whose partial transpose is unitary.

    Local unitaries around a controlled unitary sum_i e_i e_i* (x) W_i (or its
    mirror sum_a W_a (x) e_a e_a*), a family closed under partial transposition.
    """
    gen = as_generator(rng)
    if gen.integers(2) == 0:
        core = np.zeros((r * k, r * k), dtype=complex)
        for i in range(r):
            core[i * k:(i + 1) * k, i * k:(i + 1) * k] = haar_unitary(k, gen)
    else:
        core = sum(np.kron(haar_unitary(r, gen), np.diag(np.eye(k)[a])) for a in range(k))
    left = np.kron(haar_unitary(r, gen), haar_unitary(k, gen))
    right = np.kron(haar_unitary(r, gen), haar_unitary(k, gen))
    return left @ core @ right


def generate_tensor_S(d: int, r: int, k: int, rng, approx: bool = False, eps: float = 1e-12,
                      max_iter: int = 100_000, return_witness: bool = False):
    """U = (I_d (x) W^Gamma)(V (x) I_r) with V Haar on C^d (x) C^k and W in U_unital on C^r (x) C^k.

    With ``approx`` the unital factor comes from the polar iteration started at a
    Haar unitary instead of the exact controlled-unitary family.
    """
    from .scaling import sinkhorn_unital

    gen = as_generator(rng)
    v = haar_unitary(d * k, gen)
    if approx:
        w, trace = sinkhorn_unital(haar_unitary(r * k, gen), r, k, eps, max_iter)
        if not trace.converged:
            raise PatternNotRealizable("unital sampler did not converge")
    else:
        w = random_unital(r, k, gen)
    dims = [d, r, k]
    u = embed(partial_transpose(w, r, k), dims, [1, 2]) @ embed(v, dims, [0, 2])
    return (u, {"V": v, "W": w}) if return_witness else u


def generate_zero_block(d0: int, d1: int, k: int, rng) -> np.ndarray:
    """U = diag(U_00, U_11) with independent Haar blocks of sizes d0 k and d1 k."""
    if d0 < 0 or d1 < 0 or d0 + d1 == 0:
        raise ValueError("need d0, d1 >= 0 with d0 + d1 > 0")
    gen = as_generator(rng)
    u = np.zeros(((d0 + d1) * k,) * 2, dtype=complex)
    if d0:
        u[:d0 * k, :d0 * k] = haar_unitary(d0 * k, gen)
    if d1:
        u[d0 * k:, d0 * k:] = haar_unitary(d1 * k, gen)
    return u


# -- explicit examples ---------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class Fixture:
    """A named matrix with the memberships it is known to have.

    ``expected`` maps ``(algebra label, picture)`` to True (invariant) or False.
    """

    name: str
    u: np.ndarray
    n: int
    k: int
    expected: dict
    algebras: dict
    extra: dict = dataclasses.field(default_factory=dict)


def _perp(x: np.ndarray) -> np.ndarray:
    return np.array([-np.conj(x[1]), np.conj(x[0])])


def _unit(gen, dim=2):
    z = gen.standard_normal(dim) + 1j * gen.standard_normal(dim)
    return z / np.linalg.norm(z)


def unitary_dilation(a: np.ndarray) -> np.ndarray:
    """Halmos dilation [[A, (I - AA*)^1/2], [(I - A*A)^1/2, -A*]] of a strict contraction."""
    from scipy.linalg import sqrtm

    m = a.shape[0]
    eye = np.eye(m)
    top = np.hstack([a, sqrtm(eye - a @ a.conj().T)])
    bottom = np.hstack([sqrtm(eye - a.conj().T @ a), -a.conj().T])
    return np.vstack([top, bottom])


def _embedded_w_matrix(w: np.ndarray) -> np.ndarray:
    # 1-based layout from the comparison example with A_1 = D_3, A_2 = M_2 (+) M_1
    u = np.zeros((9, 9), dtype=complex)
    for row, col in ((1, 8), (4, 9), (7, 7), (8, 1), (9, 4)):
        u[row - 1, col - 1] = 1.0
    rows = [1, 2, 4, 5]
    cols = [1, 2, 4, 5]
    for a, ra in enumerate(rows):
        for b, cb in enumerate(cols):
            u[ra, cb] = w[a, b]
    return u


def fixtures(seed: int = 20160101) -> dict[str, Fixture]:
    """The explicit examples and counterexamples, each with its expected verdicts."""
    from .channels import AlgebraSpec

    gen = np.random.default_rng(seed)
    out = {}

    diag2 = AlgebraSpec.diagonal(2)

    def add(name, u, n, k, algebras, expected, **extra):
        out[name] = Fixture(name, u, n, k, expected, algebras, extra)

    add("identity", np.eye(4, dtype=complex), 2, 2, {"diagonal": diag2},
        {("diagonal", "S"): True, ("diagonal", "T"): True})
    # S(X) = Tr(X beta) I, but T(X) = Tr(X) beta leaves the diagonal for generic beta
    add("flip", flip(2), 2, 2, {"diagonal": diag2},
        {("diagonal", "S"): True, ("diagonal", "T"): False})

    # n = k = 2, rank-one blocks, type (C2),(C3)
    a, b, c, dv = (_unit(gen) for _ in range(4))
    u = np.block([[np.outer(a, b.conj()), np.outer(_perp(a), c.conj())],
                  [np.outer(dv, _perp(b).conj()), np.outer(_perp(dv), _perp(c).conj())]])
    add("rank-one-h", u, 2, 2, {"diagonal": diag2}, {("diagonal", "S"): True, ("diagonal", "T"): False},
        a=a, b=b, c=c, d=dv)

    # type (C2),(C3),(C4) but not (C1): <b, c> != 0
    a, b, c = (_unit(gen) for _ in range(3))
    u = np.block([[np.outer(a, b.conj()), np.outer(_perp(a), c.conj())],
                  [np.outer(_perp(a), _perp(b).conj()), np.outer(a, _perp(c).conj())]])
    add("rank-one-s", u, 2, 2, {"diagonal": diag2}, {("diagonal", "S"): True, ("diagonal", "T"): True},
        a=a, b=b, c=c)

    # D_3 vs M_2 (+) M_1, k = 3
    e = np.eye(3, dtype=complex)
    layout = [[(0, 0), (1, 0), (2, 0)], [(2, 1), (0, 1), (1, 1)], [(1, 2), (2, 2), (0, 2)]]
    u = np.zeros((9, 9), dtype=complex)
    for i in range(3):
        for j in range(3):
            x, y = layout[i][j]
            u[i * 3:(i + 1) * 3, j * 3:(j + 1) * 3] = np.outer(e[x], e[y])
    algs3 = {"diagonal": AlgebraSpec.diagonal(3), "blocks=2,1": AlgebraSpec.blocks([2, 1])}
    add("sec5-3-a", u, 3, 3, algs3, {("diagonal", "S"): True, ("blocks=2,1", "S"): False})

    g = gen.standard_normal((2, 2)) + 1j * gen.standard_normal((2, 2))
    w11 = 0.5 * g / np.linalg.norm(g, 2)
    w = unitary_dilation(w11)
    add("sec5-3-b", _embedded_w_matrix(w), 3, 3, algs3,
        {("diagonal", "S"): False, ("blocks=2,1", "S"): True}, W=w)

    # M_d (x) I_r vs r copies of M_d, d = r = k = 2, system ordered C^d (x) C^r
    d = r = k = 2
    v = unitary_dilation(0.5 * np.eye(2) + 0.3j * np.array([[0, 1], [1, 0]]))
    w = haar_unitary(d * k, gen)
    dims = [d, r, k]
    u = embed(v, dims, [1, 2]) @ embed(w, dims, [0, 2])
    # r copies of M_d with the copy index outermost: swap to C^r (x) C^d
    swap = swap_matrix(d, r)
    tensor_alg = AlgebraSpec.tensor(d, r)
    blocks_alg = AlgebraSpec.blocks([d] * r, basis_change=swap.conj().T)
    add("sec6-3-a", u, d * r, k, {"tensor=2,2": tensor_alg, "blocks=2,2": blocks_alg},
        {("tensor=2,2", "S"): True, ("blocks=2,2", "S"): False}, V=v, W=w)

    # U = sum_ab g_a g_b* (x) Vt_ab (x) f_ab e_ab*, system ordered C^r (x) C^d
    e_cols = [haar_unitary(k, gen) for _ in range(r)]  # e_ab = e_cols[b][:, a]
    f_rows = [haar_unitary(k, gen) for _ in range(r)]  # f_ab = f_rows[a][:, b]
    vt = [[haar_unitary(d, gen) for _ in range(r)] for _ in range(r)]
    u = np.zeros((r * d * k,) * 2, dtype=complex)
    for ia in range(r):
        for ib in range(r):
            blk = np.kron(vt[ia][ib], np.outer(f_rows[ia][:, ib], e_cols[ib][:, ia].conj()))
            u[ia * d * k:(ia + 1) * d * k, ib * d * k:(ib + 1) * d * k] = blk
    tensor_rd = AlgebraSpec.tensor(d, r, basis_change=swap)
    add("sec6-3-b", u, d * r, k, {"tensor=2,2": tensor_rd, "blocks=2,2": AlgebraSpec.blocks([d] * r)},
        {("tensor=2,2", "S"): False, ("blocks=2,2", "S"): True})
    return out
