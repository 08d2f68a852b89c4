"""Numerical tolerances and exception types shared by every module."""

from __future__ import annotations

import dataclasses


@dataclasses.dataclass(frozen=True)
class Tolerances:
    unitary: float = 1e-10
    polar: float = 1e-10
    ortho: float = 1e-10
    # relative to the largest eigenvalue
    pd_rel: float = 1e-12
    # relative to the largest singular value of the whole matrix
    rank_rel: float = 1e-8
    iso: float = 1e-9
    oracle: float = 1e-9


DEFAULT = Tolerances()


class SubalgError(Exception):
    pass


class DimensionMismatch(SubalgError, ValueError):
    pass


class NotPositiveDefinite(SubalgError, ValueError):
    pass


class InvalidPattern(SubalgError, ValueError):
    pass


class PatternNotRealizable(SubalgError, RuntimeError):
    pass


class NotDiagonalPreserving(SubalgError, ValueError):
    pass


class SchemaError(SubalgError, ValueError):
    pass
