"""Dense complex linear algebra primitives.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.  Bipartite
operators on C^n (x) C^k are stored with the system index outermost, so the
k x k block ``(i, j)`` of an nk x nk matrix ``U`` is ``U[i*k:(i+1)*k, j*k:(j+1)*k]``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from typing import Any, Sequence

import numpy as np

from .config import DEFAULT, DimensionMismatch, NotPositiveDefinite, SchemaError


@dataclasses.dataclass(frozen=True)
class RngStream:
    """Reproducible random stream keyed by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")


@dataclasses.dataclass(frozen=True)
class Subspace:
    """Subspace of C^ambient_dim given by an orthonormal column basis."""

    ambient_dim: int
    basis: np.ndarray

    def __post_init__(self):
        if self.basis.ndim != 2 or self.basis.shape[0] != self.ambient_dim:
            raise DimensionMismatch(
                f"basis shape {self.basis.shape} incompatible with ambient dim {self.ambient_dim}"
            )

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def orthonormality_residual(self) -> float:
        return float(np.linalg.norm(self.basis.conj().T @ self.basis - np.eye(self.dim)))

    @classmethod
    def span(cls, vectors: np.ndarray, tol: float = 1e-10) -> "Subspace":
        """Orthonormal basis for the column span of ``vectors``."""
        vectors = np.asarray(vectors, dtype=complex)
        if vectors.shape[1] == 0:
            return cls(vectors.shape[0], vectors)
        u, s, _ = np.linalg.svd(vectors, full_matrices=False)
        rank = int(np.sum(s > tol * max(s[0], 1.0)))
        return cls(vectors.shape[0], u[:, :rank])


def projector_distance(a: Subspace, b: Subspace) -> float:
    return float(np.linalg.norm(a.projector() - b.projector()))


def _require_square(x: np.ndarray, size: int | None = None, name: str = "matrix"):
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {x.shape}")
    if size is not None and x.shape[0] != size:
        raise DimensionMismatch(f"{name} must be {size}x{size}, got {x.shape}")


def unitarity_residual(u: np.ndarray) -> float:
    u = np.asarray(u)
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[1])))


def haar_unitary(n: int, rng) -> np.ndarray:
    """Haar-distributed n x n unitary (Ginibre, QR, phase-corrected)."""
    if n < 1:
        raise ValueError("n must be positive")
    gen = as_generator(rng)
    z = (gen.standard_normal((n, n)) + 1j * gen.standard_normal((n, n))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    # zero diagonal has probability zero; guard anyway
    phases = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    return q * phases[np.newaxis, :]


def random_unit_vectors(shape: tuple[int, ...], dim: int, rng) -> np.ndarray:
    """Independent uniform points on the unit sphere of C^dim, trailing axis is the vector."""
    gen = as_generator(rng)
    z = gen.standard_normal(shape + (dim,)) + 1j * gen.standard_normal(shape + (dim,))
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def random_density(k: int, rng, rank: int | None = None) -> np.ndarray:
    """Wishart-type random density matrix."""
    gen = as_generator(rng)
    rank = k if rank is None else rank
    g = gen.standard_normal((k, rank)) + 1j * gen.standard_normal((k, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def polar_unitary(x: np.ndarray) -> np.ndarray:
    """Unitary factor V of the polar decomposition X = V P.

    Computed from the SVD X = A S B*, returning A B*; for singular X this picks
    the completion fixed by LAPACK's deterministic ordering.
    """
    x = np.asarray(x, dtype=complex)
    _require_square(x, name="X")
    a, _, bh = np.linalg.svd(x)
    return a @ bh


def inv_sqrt_psd(p: np.ndarray, tol=DEFAULT) -> np.ndarray:
    p = np.asarray(p, dtype=complex)
    _require_square(p, name="P")
    w, v = np.linalg.eigh((p + p.conj().T) / 2)
    threshold = tol.pd_rel * max(abs(w[-1]), 0.0)
    if w[0] <= threshold or w[0] <= 0:
        raise NotPositiveDefinite(f"minimum eigenvalue {w[0]:.3e} is not above {threshold:.3e}")
    return (v / np.sqrt(w)[np.newaxis, :]) @ v.conj().T


def partial_transpose(u: np.ndarray, n: int, k: int) -> np.ndarray:
    """Transpose every k x k block: (U^Gamma)_{ij} = (U_{ij})^T."""
    u = np.asarray(u)
    _require_square(u, n * k, "U")
    return u.reshape(n, k, n, k).transpose(0, 3, 2, 1).reshape(n * k, n * k)


def partial_trace_second(x: np.ndarray, n: int, k: int) -> np.ndarray:
    """Trace out the C^k factor: Y_{ij} = Tr(X_{ij})."""
    x = np.asarray(x)
    _require_square(x, n * k, "X")
    return np.einsum("iaja->ij", x.reshape(n, k, n, k))


def partial_trace_first(x: np.ndarray, n: int, k: int) -> np.ndarray:
    x = np.asarray(x)
    _require_square(x, n * k, "X")
    return np.einsum("iaib->ab", x.reshape(n, k, n, k))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionMismatch("kron expects two matrices")
    return np.kron(a, b)


def block_get(u: np.ndarray, i: int, j: int, k: int) -> np.ndarray:
    if u.shape[0] % k or u.shape[1] % k:
        raise DimensionMismatch(f"shape {u.shape} is not a grid of {k}x{k} blocks")
    return u[i * k:(i + 1) * k, j * k:(j + 1) * k]


def block_set(u: np.ndarray, i: int, j: int, block: np.ndarray) -> None:
    k = block.shape[0]
    if block.shape != (k, k):
        raise DimensionMismatch("blocks must be square")
    u[i * k:(i + 1) * k, j * k:(j + 1) * k] = block


def blocks(u: np.ndarray, n: int, k: int) -> np.ndarray:
    """View of ``u`` as an (n, n, k, k) array of blocks."""
    _require_square(u, n * k, "U")
    return u.reshape(n, k, n, k).transpose(0, 2, 1, 3)


def from_blocks(b: np.ndarray) -> np.ndarray:
    n, _, k, _ = b.shape
    return b.transpose(0, 2, 1, 3).reshape(n * k, n * k)


def ragged_slices(dims: Sequence[int], k: int) -> list[slice]:
    """Row/column ranges of the coarse blocks for system blocks of sizes ``dims``."""
    out = []
    start = 0
    for d in dims:
        out.append(slice(start * k, (start + d) * k))
        start += d
    return out


def permute_subsystems(m: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of an operator on C^dims[0] (x) C^dims[1] (x) ...

    The output acts on the factors in the order ``perm``: new factor t is old
    factor ``perm[t]``.
    """
    dims = list(dims)
    size = int(np.prod(dims))
    _require_square(m, size, "operator")
    p = len(dims)
    t = m.reshape(dims + dims)
    axes = list(perm) + [p + q for q in perm]
    new_size = size
    return t.transpose(axes).reshape(new_size, new_size)


def embed(op: np.ndarray, dims: Sequence[int], targets: Sequence[int]) -> np.ndarray:
    """Operator ``op`` acting on the factors ``targets`` (in that order), identity elsewhere."""
    dims = list(dims)
    targets = list(targets)
    rest = [t for t in range(len(dims)) if t not in targets]
    op_size = int(np.prod([dims[t] for t in targets]))
    if op.shape != (op_size, op_size):
        raise DimensionMismatch(f"operator shape {op.shape} does not match factors {targets}")
    rest_size = int(np.prod([dims[t] for t in rest])) if rest else 1
    full = np.kron(op, np.eye(rest_size))
    order = targets + rest
    # full acts on factors in `order`; move them back to natural order
    inverse = [order.index(t) for t in range(len(dims))]
    return permute_subsystems(full, [dims[t] for t in order], inverse)


def max_entangled(k: int) -> np.ndarray:
    """Unnormalized maximally entangled vector sum_i e_i (x) e_i."""
    return np.eye(k, dtype=complex).reshape(k * k)


def swap_matrix(d: int, r: int) -> np.ndarray:
    """Permutation sending x (x) y in C^d (x) C^r to y (x) x in C^r (x) C^d."""
    p = np.zeros((d * r, d * r), dtype=complex)
    for a in range(d):
        for b in range(r):
            p[b * d + a, a * r + b] = 1.0
    return p


def flip(n: int) -> np.ndarray:
    """Swap operator on C^n (x) C^n."""
    f = np.zeros((n * n, n * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            f[i * n + j, j * n + i] = 1.0
    return f


# -- JSON interchange --------------------------------------------------------

def matrix_to_dict(m: np.ndarray) -> dict[str, Any]:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise DimensionMismatch("only matrices can be serialized")
    flat = m.reshape(-1)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "re": [float(v) for v in flat.real],
        "im": [float(v) for v in flat.imag],
    }


def matrix_from_dict(obj: Any) -> np.ndarray:
    if not isinstance(obj, dict):
        raise SchemaError("matrix JSON must be an object with rows, cols, re, im")
    for key in ("rows", "cols", "re"):
        if key not in obj:
            raise SchemaError(f"matrix JSON is missing field '{key}'")
    rows, cols = obj["rows"], obj["cols"]
    if not (isinstance(rows, int) and isinstance(cols, int)) or rows < 1 or cols < 1:
        raise SchemaError("'rows' and 'cols' must be positive integers")
    re = obj["re"]
    im = obj.get("im", [0.0] * len(re))
    expected = rows * cols
    for name, arr in (("re", re), ("im", im)):
        if not isinstance(arr, list):
            raise SchemaError(f"'{name}' must be a list of numbers")
        if len(arr) != expected:
            raise SchemaError(f"'{name}' has length {len(arr)}, expected rows*cols = {expected}")
    try:
        data = np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"non-numeric matrix entries: {exc}") from None
    return data.reshape(rows, cols)


def dumps_matrix(m: np.ndarray) -> str:
    return json.dumps(matrix_to_dict(m))


def loads_matrix(text: str) -> np.ndarray:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return matrix_from_dict(obj)
