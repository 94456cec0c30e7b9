"""Numba toggle.

Set ``SPD_DISABLE_NUMBA=1`` to force the pure-numpy kernels (useful for
debugging and for checking that both paths agree).
"""

import os

_FLAG = os.environ.get("SPD_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def njit(fn):
    """Compile ``fn`` in nopython mode when numba is importable, else return it."""
    if numba is None:  # pragma: no cover
        return fn
    return numba.njit(cache=True, nogil=True)(fn)
