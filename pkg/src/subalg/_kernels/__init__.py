"""Backend selection for the hot scaling loops.

``SUBALG_BACKEND=numpy`` forces the vectorized numpy path; the default is the
numba path when numba imports, numpy otherwise.
"""

import os
import warnings

from . import _numpy

try:
    from . import _numba
except ImportError:  # pragma: no cover - exercised only without numba
    _numba = None

_BACKENDS = {"numpy": _numpy}
if _numba is not None:
    _BACKENDS["numba"] = _numba


def _default_backend() -> str:
    wanted = os.environ.get("SUBALG_BACKEND", "").strip().lower()
    if wanted in ("", "auto"):
        return "numba" if _numba is not None else "numpy"
    if wanted not in ("numba", "numpy"):
        raise ValueError(f"SUBALG_BACKEND must be 'numba' or 'numpy', got {wanted!r}")
    if wanted == "numba" and _numba is None:
        warnings.warn("numba is not importable; falling back to numpy kernels")
        return "numpy"
    return wanted


BACKEND = _default_backend()


def available() -> list:
    return sorted(_BACKENDS)


def get(name=None):
    """Kernel module for ``name`` (default: the process-wide backend)."""
    return _BACKENDS[name or BACKEND]
