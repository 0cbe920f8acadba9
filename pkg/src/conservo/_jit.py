"""JIT switch and kernel signatures.

Kernels are decorated with :func:`njit` from this module.  When numba is
importable and ``CONSERVO_DISABLE_JIT`` is unset (or ``0``), they are compiled
with ``numba.njit``; otherwise the decorator is the identity and the same
source runs as plain numpy.  The flag is read once, at import time.

System kernels are passed to the compiled loops as first-class functions.
Giving them fixed signatures (the ``*_kernel`` decorators below) lets one
compiled loop serve every system and keeps the on-disk cache valid across
processes; with plain dispatcher arguments numba would recompile the whole
loop for each system in every new process.

=====================  ==========================================
decorator              signature
=====================  ==========================================
``vector_kernel``      ``(t, x, p) -> 1-d array`` (source, psi)
``predicate_kernel``   ``(t, x, p) -> bool`` (domain test)
``matrix_kernel``      ``(t, x, p) -> 2-d array`` (gradient of psi)
``increments_kernel``  ``(psi, domain, t, x_new, x_old, p, out) -> status``
=====================  ==========================================

``x`` and ``p`` are C-contiguous float64 vectors and ``t`` a float.
"""

import os

_FLAG = os.environ.get("CONSERVO_DISABLE_JIT", "0").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _numba = None

JIT_ENABLED = _numba is not None and _FLAG in ("", "0", "false", "no")

if _numba is not None:
    from numba import types as _t

    F64, I64, BOOL = _t.float64, _t.int64, _t.boolean
    VEC = _t.float64[::1]
    MAT = _t.float64[:, ::1]
    VECTOR_SIG = VEC(F64, VEC, VEC)
    PREDICATE_SIG = BOOL(F64, VEC, VEC)
    MATRIX_SIG = MAT(F64, VEC, VEC)
    VEC_FN = _t.FunctionType(VECTOR_SIG)
    BOOL_FN = _t.FunctionType(PREDICATE_SIG)
    MAT_FN = _t.FunctionType(MATRIX_SIG)
    INCREMENTS_SIG = I64(VEC_FN, BOOL_FN, F64, VEC, VEC, VEC, MAT)
    INCR_FN = _t.FunctionType(INCREMENTS_SIG)
else:  # pragma: no cover
    F64 = I64 = BOOL = VEC = MAT = None
    VECTOR_SIG = PREDICATE_SIG = MATRIX_SIG = INCREMENTS_SIG = None
    VEC_FN = BOOL_FN = MAT_FN = INCR_FN = None


def njit(*args, **kwargs):
    """``numba.njit`` with ``cache=True`` by default, or a no-op.

    Positional signatures (full or argument-only tuples) are passed through.
    """
    if JIT_ENABLED:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def vector_kernel(fn):
    return njit(VECTOR_SIG)(fn)


def predicate_kernel(fn):
    return njit(PREDICATE_SIG)(fn)


def matrix_kernel(fn):
    return njit(MATRIX_SIG)(fn)


def increments_kernel(fn):
    return njit(INCREMENTS_SIG)(fn)
