"""Backend switch for the hot kernels.

Kernels are written twice: a numba ``@njit`` loop version and a vectorised
numpy version. The numba path is used when numba imports and the environment
variable ``GUIDED_STEREO_DISABLE_NUMBA`` is unset (or set to ``0``/``false``).
Both paths are required to produce bit-identical results.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional speedup
    numba = None

_FLAG = "GUIDED_STEREO_DISABLE_NUMBA"


def _disabled_by_env():
    return os.environ.get(_FLAG, "0").strip().lower() not in ("", "0", "false", "no")


HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _disabled_by_env()


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or an identity decorator without numba."""
    if numba is None:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
