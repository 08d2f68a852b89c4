"""The dual pair of maps generated by a bipartite unitary and an ancilla state.

    S(X) = [id (x) Tr](U* (X (x) I_k) U (I_n (x) beta))     unital, Heisenberg picture
    T(X) = [id (x) Tr](U (X (x) beta) U*)                   trace preserving, Schrodinger picture
"""

from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from .config import DEFAULT, DimensionMismatch, NotDiagonalPreserving, SchemaError, Tolerances
from .isometry import classify_type
from .matcore import as_generator, partial_trace_second, random_density, unitarity_residual


@dataclasses.dataclass(frozen=True)
class ChannelSpec:
    u: np.ndarray
    beta: np.ndarray
    n: int
    k: int
    check: bool = dataclasses.field(default=True, compare=False)

    def __post_init__(self):
        nk = self.n * self.k
        if self.u.shape != (nk, nk):
            raise DimensionMismatch(f"U must be {nk}x{nk}, got {self.u.shape}")
        if self.beta.shape != (self.k, self.k):
            raise DimensionMismatch(f"beta must be {self.k}x{self.k}, got {self.beta.shape}")
        if not self.check:
            return
        if unitarity_residual(self.u) > 1e-8:
            raise ValueError("U is not unitary")
        if abs(np.trace(self.beta) - 1) > 1e-12 or np.linalg.norm(self.beta - self.beta.conj().T) > 1e-12:
            raise ValueError("beta must be Hermitian with unit trace")
        if np.linalg.eigvalsh(self.beta)[0] < -1e-12:
            raise ValueError("beta must be positive semidefinite")


def _check_input(spec: ChannelSpec, x: np.ndarray):
    if x.shape != (spec.n, spec.n):
        raise DimensionMismatch(f"X must be {spec.n}x{spec.n}, got {x.shape}")


def apply_S(spec: ChannelSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    _check_input(spec, x)
    u = spec.u
    m = u.conj().T @ np.kron(x, np.eye(spec.k)) @ u @ np.kron(np.eye(spec.n), spec.beta)
    return partial_trace_second(m, spec.n, spec.k)


def apply_T(spec: ChannelSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    _check_input(spec, x)
    u = spec.u
    return partial_trace_second(u @ np.kron(x, spec.beta) @ u.conj().T, spec.n, spec.k)


def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product Tr(A* B)."""
    return complex(np.vdot(a, b))


def choi_T(spec: ChannelSpec) -> np.ndarray:
    """Choi matrix sum_ij e_i e_j* (x) T(e_i e_j*)."""
    n = spec.n
    c = np.zeros((n * n, n * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = 1.0
            c[i * n:(i + 1) * n, j * n:(j + 1) * n] = apply_T(spec, e)
    return c


# -- algebras ----------------------------------------------------------------

_KINDS = ("diagonal", "blocks", "tensor", "zero", "full")


@dataclasses.dataclass(frozen=True)
class AlgebraSpec:
    """A *-subalgebra of M_n in standard form, optionally rotated.

    ``dims`` holds (1,)*n for diagonal, (d_1, ..., d_N) for blocks, (d, r) for
    tensor (M_d (x) I_r), (d0, d1) for zero (0_{d0} (+) M_{d1}) and (n,) for full.
    With ``basis_change`` B the algebra is B A B*.
    """

    kind: str
    dims: tuple
    basis_change: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown algebra kind {self.kind!r}")
        if any(int(d) < 0 for d in self.dims) or sum(self.dims) == 0:
            raise ValueError(f"invalid dimensions {self.dims}")
        if self.basis_change is not None:
            b = self.basis_change
            if b.shape != (self.n, self.n) or unitarity_residual(b) > 1e-10:
                raise ValueError("basis_change must be an n x n unitary")

    @classmethod
    def diagonal(cls, n: int, basis_change=None):
        return cls("diagonal", (1,) * n, basis_change)

    @classmethod
    def blocks(cls, dims: Sequence[int], basis_change=None):
        return cls("blocks", tuple(int(d) for d in dims), basis_change)

    @classmethod
    def tensor(cls, d: int, r: int, basis_change=None):
        return cls("tensor", (int(d), int(r)), basis_change)

    @classmethod
    def zero(cls, d0: int, d1: int, basis_change=None):
        return cls("zero", (int(d0), int(d1)), basis_change)

    @classmethod
    def full(cls, n: int, basis_change=None):
        return cls("full", (int(n),), basis_change)

    @classmethod
    def parse(cls, text: str, n: int | None = None) -> "AlgebraSpec":
        """Parse ``diagonal``, ``blocks=2,1``, ``tensor=d,r``, ``zero=d0,d1`` or ``full``."""
        name, _, arg = text.partition("=")
        try:
            nums = [int(v) for v in arg.split(",")] if arg else []
        except ValueError:
            raise SchemaError(f"bad algebra dimensions in {text!r}") from None
        if name in ("diagonal", "full"):
            if n is None:
                raise SchemaError(f"algebra {name!r} needs the system dimension n")
            return cls.diagonal(n) if name == "diagonal" else cls.full(n)
        if name == "blocks" and nums:
            return cls.blocks(nums)
        if name in ("tensor", "zero") and len(nums) == 2:
            return cls.tensor(*nums) if name == "tensor" else cls.zero(*nums)
        raise SchemaError(f"cannot parse algebra {text!r}")

    def label(self) -> str:
        if self.kind in ("diagonal", "full"):
            return self.kind
        return f"{self.kind}=" + ",".join(str(d) for d in self.dims)

    @property
    def n(self) -> int:
        if self.kind == "tensor":
            return self.dims[0] * self.dims[1]
        return int(sum(self.dims))

    def _project_std(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "full":
            return x.copy()
        if self.kind == "diagonal":
            return np.diag(np.diagonal(x))
        if self.kind == "blocks":
            out = np.zeros_like(x)
            start = 0
            for d in self.dims:
                out[start:start + d, start:start + d] = x[start:start + d, start:start + d]
                start += d
            return out
        if self.kind == "tensor":
            d, r = self.dims
            reduced = np.einsum("aibi->ab", x.reshape(d, r, d, r)) / r
            return np.kron(reduced, np.eye(r))
        d0, _ = self.dims
        out = np.zeros_like(x)
        out[d0:, d0:] = x[d0:, d0:]
        return out

    def project(self, x: np.ndarray) -> np.ndarray:
        """Hilbert-Schmidt orthogonal projection onto the algebra."""
        b = self.basis_change
        if b is None:
            return self._project_std(x)
        return b @ self._project_std(b.conj().T @ x @ b) @ b.conj().T

    def _generators_std(self) -> list[np.ndarray]:
        n = self.n

        def unit(i, j, size=n):
            e = np.zeros((size, size), dtype=complex)
            e[i, j] = 1.0
            return e

        if self.kind == "full":
            return [unit(i, j) for i in range(n) for j in range(n)]
        if self.kind == "diagonal":
            return [unit(i, i) for i in range(n)]
        if self.kind == "blocks":
            out = []
            start = 0
            for d in self.dims:
                out += [unit(start + i, start + j) for i in range(d) for j in range(d)]
                start += d
            return out
        if self.kind == "tensor":
            d, r = self.dims
            return [np.kron(unit(a, b, d), np.eye(r)) for a in range(d) for b in range(d)]
        d0, d1 = self.dims
        return [unit(d0 + i, d0 + j) for i in range(d1) for j in range(d1)]

    def generators(self) -> list[np.ndarray]:
        """Matrix units spanning the algebra."""
        b = self.basis_change
        gens = self._generators_std()
        if b is None:
            return gens
        return [b @ g @ b.conj().T for g in gens]


def in_algebra(x: np.ndarray, alg: AlgebraSpec) -> float:
    """Distance ||X - P(X)||_F from X to the algebra."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (alg.n, alg.n):
        raise DimensionMismatch(f"X must be {alg.n}x{alg.n}, got {x.shape}")
    return float(np.linalg.norm(x - alg.project(x)))


# -- spanning families of ancilla states -------------------------------------

@dataclasses.dataclass(frozen=True)
class SpanningFamily:
    states: tuple

    @property
    def k(self) -> int:
        return self.states[0].shape[0]

    def gram_condition(self) -> float:
        vecs = np.array([s.reshape(-1) for s in self.states])
        gram = vecs.conj() @ vecs.T
        return float(np.linalg.cond(gram))

    def spans(self) -> bool:
        vecs = np.array([s.reshape(-1) for s in self.states])
        return int(np.linalg.matrix_rank(vecs)) == self.k ** 2


def spanning_family(k: int, rng=None, n_random: int = 0) -> SpanningFamily:
    """k^2 pure states spanning M_k, plus ``n_random`` Wishart states.

    The canonical part is {e_i e_i*} together with the projectors onto
    (e_i + e_j)/sqrt2 and (e_i + i e_j)/sqrt2 for i < j.
    """
    if k < 1:
        raise ValueError("k must be positive")
    states = []
    eye = np.eye(k, dtype=complex)
    for i in range(k):
        states.append(np.outer(eye[i], eye[i]))
    for i in range(k):
        for j in range(i + 1, k):
            for phase in (1.0, 1j):
                v = (eye[i] + phase * eye[j]) / np.sqrt(2)
                states.append(np.outer(v, v.conj()))
    if n_random:
        gen = as_generator(rng)
        states += [random_density(k, gen) for _ in range(n_random)]
    return SpanningFamily(tuple(states))


def _picture_map(picture: str):
    p = picture.upper()
    if p in ("S", "H", "HEISENBERG"):
        return apply_S
    if p in ("T", "SCHRODINGER"):
        return apply_T
    raise ValueError(f"unknown picture {picture!r}; use 'S' (Heisenberg) or 'T' (Schrodinger)")


def invariance_oracle(u: np.ndarray, alg: AlgebraSpec, picture: str, family: SpanningFamily | None = None) -> float:
    """Largest algebra defect of channel(X) over beta in family and X among the algebra's generators.

    ``picture`` is "S" for the unital map and "T" for the channel.
    """
    u = np.asarray(u, dtype=complex)
    n = alg.n
    if u.shape[0] % n:
        raise DimensionMismatch(f"U of size {u.shape[0]} is not compatible with n = {n}")
    k = u.shape[0] // n
    family = spanning_family(k) if family is None else family
    if family.k != k:
        raise DimensionMismatch(f"states are {family.k}x{family.k}, expected {k}x{k}")
    channel = _picture_map(picture)
    gens = alg.generators()
    worst = 0.0
    for beta in family.states:
        spec = ChannelSpec(u, beta, n, k, check=False)
        for g in gens:
            worst = max(worst, in_algebra(channel(spec, g), alg))
    return worst


# -- Markov chain on the diagonal --------------------------------------------

def markov_matrix(spec: ChannelSpec, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Transition matrix P_ij = Tr(P_{E_ji} beta) of the channel restricted to diagonals.

    The formula is cross-checked against the diagonals of T(e_i e_i*); a channel
    creating coherences raises ``NotDiagonalPreserving``.
    """
    n, k = spec.n, spec.k
    extracted = np.zeros((n, n))
    for j in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[j, j] = 1.0
        out = apply_T(spec, e)
        off = float(np.linalg.norm(out - np.diag(np.diagonal(out))))
        if off > tol.oracle:
            raise NotDiagonalPreserving(f"T(e_{j} e_{j}*) has off-diagonal mass {off:.3e}")
        extracted[j] = np.diagonal(out).real
    reports, flags = classify_type(spec.u, n, k, tol)
    if not flags.c3:
        return extracted
    p = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            p[i, j] = np.trace(reports[j][i].initial.projector() @ spec.beta).real
    if np.max(np.abs(p - extracted)) > 1e-8:
        raise NotDiagonalPreserving("initial-space formula disagrees with the channel action")
    return p
