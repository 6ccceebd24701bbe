"""Numba/numpy kernel dispatch.

The hot inner loops (hierarchy right-hand side, mainly) exist twice: a
numba ``@njit`` version and a pure-numpy vectorized twin.  The environment
variable ``SB2Q_FORCE_NUMPY=1`` forces the numpy path; otherwise numba is
used whenever it imports.  ``benchmarks/bench_rhs.py`` compares the two.
"""

import os

FORCE_NUMPY = os.environ.get("SB2Q_FORCE_NUMPY", "0") not in ("", "0", "false", "False")

try:
    if FORCE_NUMPY:
        raise ImportError("numpy path forced via SB2Q_FORCE_NUMPY")
    import numba
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via SB2Q_FORCE_NUMPY
    HAS_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        """No-op stand-in so decorated functions stay importable."""
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def set_threads(n):
    """Limit the numba thread pool; no-op on the numpy path."""
    if HAS_NUMBA and n is not None and n > 0:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def backend_name():
    return "numba" if HAS_NUMBA else "numpy"
