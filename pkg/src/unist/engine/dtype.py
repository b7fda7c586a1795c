"""Engine-wide scalar type and debug-check switches.

Training runs in float32 by default; gradient-check suites switch the engine
to float64 because central finite differences need the extra precision.
The switch applies to tensors created after it is flipped, so models meant
for checking must be constructed inside :func:`dtype_scope`.
"""

from contextlib import contextmanager

import numpy as np

_DEFAULT_DTYPE = np.float32
_DEBUG_CHECKS = False


def set_default_dtype(dtype) -> None:
    """Set the scalar type (np.float32 or np.float64) for new tensors."""
    global _DEFAULT_DTYPE
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"engine dtype must be float32 or float64, got {dt}")
    _DEFAULT_DTYPE = dt.type


def get_default_dtype():
    return _DEFAULT_DTYPE


@contextmanager
def dtype_scope(dtype):
    """Temporarily switch the engine scalar type."""
    previous = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


def set_debug_checks(enabled: bool) -> None:
    """Enable per-op finiteness checks (NaN/Inf raise NumericError)."""
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = bool(enabled)


def debug_checks_enabled() -> bool:
    return _DEBUG_CHECKS
