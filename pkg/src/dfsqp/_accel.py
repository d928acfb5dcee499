"""Optional numba acceleration for the hot numeric kernels.

The kernels in :mod:`dfsqp._kernels` are written as plain loops over float64
arrays so that the exact same source runs either JIT-compiled (numba) or as
ordinary Python/numpy.  Set the environment variable ``DFSQP_DISABLE_NUMBA=1``
before import to force the pure-numpy path; the flag is also implied when
numba is not installed.
"""
import os


def _numba_requested() -> bool:
    flag = os.environ.get("DFSQP_DISABLE_NUMBA", "").strip().lower()
    return flag not in ("1", "true", "yes", "on")


NUMBA_ENABLED = False
if _numba_requested():
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - mirror-installed in CI
        NUMBA_ENABLED = False


if NUMBA_ENABLED:
    from numba import njit

    def jit(func):
        return njit(cache=True)(func)

else:

    def jit(func):
        return func
