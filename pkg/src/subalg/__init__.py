"""Bipartite unitaries whose induced channels preserve matrix subalgebras."""

from .config import (
    DEFAULT,
    DimensionMismatch,
    InvalidPattern,
    NotDiagonalPreserving,
    NotPositiveDefinite,
    PatternNotRealizable,
    SchemaError,
    Tolerances,
)
from .matcore import (
    RngStream,
    Subspace,
    haar_unitary,
    inv_sqrt_psd,
    kron,
    partial_trace_second,
    partial_transpose,
    polar_unitary,
)

__version__ = "0.1.0"
