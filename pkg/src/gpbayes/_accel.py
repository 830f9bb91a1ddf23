"""Acceleration switch for the hot numeric kernels.

Every hot loop in this package ships in two builds: a numba ``@njit``
version written with explicit loops, and a vectorized pure-numpy
fallback. Which build the package routes to is decided once, at import
time:

* ``GPBAYES_NO_NUMBA`` set to anything other than ``0``/``false``
  (or numba missing from the environment)  ->  numpy path
* otherwise                                ->  jit path

Both builds of every kernel remain importable regardless of the switch,
so ``benchmarks/bench_accel.py`` and the cross-path tests can compare
them directly. Results agree to floating-point roundoff; bitwise output
is only guaranteed within one path.
"""

from __future__ import annotations

import os


def _numba_requested() -> bool:
    flag = os.environ.get("GPBAYES_NO_NUMBA", "0").strip().lower()
    return flag in ("", "0", "false", "no")


NUMBA_AVAILABLE = False
if _numba_requested():
    try:
        from numba import njit as _numba_njit

        NUMBA_AVAILABLE = True
    except ImportError:  # pragma: no cover - depends on environment
        NUMBA_AVAILABLE = False

#: True when the package routes hot kernels through numba.
USE_NUMBA = NUMBA_AVAILABLE

if USE_NUMBA:
    njit = _numba_njit
else:

    def njit(*args, **kwargs):
        """Stand-in for ``numba.njit`` that leaves the function as-is."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap
