"""Backend selection for the hot kernels.

Set ``LOWLIGHT_BENCH_BACKEND=numpy`` to force the pure-numpy path; the
default is ``numba`` whenever numba imports cleanly.
"""

import os

try:
    from numba import njit as _numba_njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False
    _numba_njit = None

ENV_VAR = "LOWLIGHT_BENCH_BACKEND"


def _resolve_backend():
    requested = os.environ.get(ENV_VAR, "numba").strip().lower()
    if requested not in ("numba", "numpy"):
        raise ValueError(f"{ENV_VAR} must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba" and not NUMBA_AVAILABLE:
        return "numpy"
    return requested


BACKEND = _resolve_backend()
USE_NUMBA = BACKEND == "numba"


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise a no-op decorator.

    Compiled functions stay plain Python callables when numba is missing, so
    the numba-flavoured kernels can still run (slowly) under test.
    """
    if NUMBA_AVAILABLE:
        kwargs.setdefault("cache", True)
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def decorate(func):
        return func

    return decorate
