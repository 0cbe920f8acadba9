"""Discrete multipliers built from telescoping partial divided differences.

For states ``x_old`` and ``x_new`` the path ``z_0 = x_old, ..., z_n = x_new``
switches one coordinate at a time (identity order), and column ``j`` of the
multiplier is ``[psi(z_j) - psi(z_{j-1})] / (x_new_j - x_old_j)``.  Summing
columns times increments telescopes back to ``psi(x_new) - psi(x_old)``, so
the discrete chain rule holds to rounding regardless of how nonlinear psi is.

Time is frozen at ``t`` along the path; explicit time dependence goes through
:func:`discrete_time_partial` instead.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._jit import (
    BOOL,
    BOOL_FN,
    F64,
    I64,
    INCR_FN,
    MAT_FN,
    VEC,
    VEC_FN,
    increments_kernel,
    matrix_kernel,
    njit,
)
from .errors import DOMAIN, OK, InvalidParams, raise_for_status

DEG_RTOL = 1e-10
FD_RSTEP = 1e-6


# ---------------------------------------------------------------- kernels


@increments_kernel
def generic_increments(psi, domain, t, x_new, x_old, p, out):
    """Fill ``out[:, j] = psi(t, z_j) - psi(t, z_{j-1})`` along the
    coordinate path; returns a status code."""
    n = x_old.shape[0]
    z = x_old.copy()
    if not domain(t, z, p):
        return DOMAIN
    prev = psi(t, z, p)
    for j in range(n):
        if x_new[j] == x_old[j]:
            out[:, j] = 0.0
            continue
        z[j] = x_new[j]
        if not domain(t, z, p):
            return DOMAIN
        cur = psi(t, z, p)
        out[:, j] = cur - prev
        prev = cur
    return OK


@matrix_kernel
def no_grad(t, x, p):
    return np.zeros((1, x.shape[0]))


@njit((VEC_FN, BOOL_FN, F64, VEC, I64, VEC))
def _partial_fd(psi, domain, t, z, j, p):
    h = FD_RSTEP * max(1.0, abs(z[j]))
    zp = z.copy()
    zm = z.copy()
    zp[j] += h
    zm[j] -= h
    if not (domain(t, zp, p) and domain(t, zm, p)):
        return np.zeros(1), DOMAIN
    return (psi(t, zp, p) - psi(t, zm, p)) / (2.0 * h), OK


@njit((VEC_FN, BOOL_FN, MAT_FN, BOOL, INCR_FN, I64, F64, VEC, VEC, VEC, F64))
def _telescoping(psi, domain, grad, has_grad, incr, m, t, x_new, x_old, p, deg_rtol):
    n = x_old.shape[0]
    diffs = np.empty((m, n))
    lam = np.empty((m, n))
    degenerate = np.zeros(n, dtype=np.bool_)
    status = incr(psi, domain, t, x_new, x_old, p, diffs)
    if status != OK:
        return lam, degenerate, status
    for j in range(n):
        dx = x_new[j] - x_old[j]
        tol = deg_rtol * max(1.0, abs(x_new[j]), abs(x_old[j]))
        if abs(dx) >= tol:
            lam[:, j] = diffs[:, j] / dx
            continue
        degenerate[j] = True
        zmid = np.empty(n)
        zmid[:j] = x_new[:j]
        zmid[j] = 0.5 * (x_new[j] + x_old[j])
        zmid[j + 1:] = x_old[j + 1:]
        if has_grad:
            if not domain(t, zmid, p):
                return lam, degenerate, DOMAIN
            lam[:, j] = grad(t, zmid, p)[:, j]
        else:
            col, st = _partial_fd(psi, domain, t, zmid, j, p)
            if st != OK:
                return lam, degenerate, st
            lam[:, j] = col
    return lam, degenerate, OK


@njit((VEC_FN, BOOL, I64, F64, F64, VEC, VEC))
def _time_partial(psi, time_dep, m, t_k, t_next, x_new, p):
    if not time_dep:
        return np.zeros(m)
    return (psi(t_next, x_new, p) - psi(t_k, x_new, p)) / (t_next - t_k)


# ------------------------------------------------------------ public API


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """A dynamical system ``x' = f(t, x)`` with ``m`` conserved quantities.

    The ``*_kernel`` callables take ``(t, x, params)`` and must carry the
    fixed signatures of the decorators in :mod:`conservo._jit`
    (``vector_kernel`` for source and psi, ``predicate_kernel`` for the
    domain test, ``matrix_kernel`` for the gradient) so the compiled loops
    can call them.  ``increments_kernel`` may be replaced by a system-specific
    routine that computes the path differences of psi more cheaply (see the
    vortex system).  ``analytic_multiplier(t, x_new, x_old)`` is an optional
    plain-Python reference multiplier, used for verification only.
    """

    name: str
    n: int
    m: int
    source_kernel: Callable
    conserved_kernel: Callable
    domain_kernel: Callable
    params: np.ndarray
    grad_kernel: Optional[Callable] = None
    increments_kernel: Callable = generic_increments
    time_dependent: bool = False
    analytic_multiplier: Optional[Callable] = None
    conserved_names: tuple = ()
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.m < self.n:
            raise InvalidParams(f"{self.name}: need 1 <= m < n, got m={self.m}, n={self.n}")
        object.__setattr__(
            self, "params", np.ascontiguousarray(np.asarray(self.params, dtype=float))
        )
        if not self.conserved_names:
            names = tuple(f"psi_{i}" for i in range(self.m))
            object.__setattr__(self, "conserved_names", names)

    @property
    def has_grad(self):
        return self.grad_kernel is not None

    @property
    def grad_or_dummy(self):
        return self.grad_kernel if self.grad_kernel is not None else no_grad

    def _vec(self, x):
        x = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1))
        if x.shape[0] != self.n:
            raise InvalidParams(f"{self.name}: expected state of length {self.n}")
        return x

    def in_domain(self, t, x):
        return bool(self.domain_kernel(float(t), self._vec(x), self.params))

    def _check(self, t, x):
        if not self.in_domain(t, x):
            raise_for_status(DOMAIN, f"{self.name} at t={t}, x={x}")

    def source(self, t, x):
        x = self._vec(x)
        self._check(t, x)
        return np.asarray(self.source_kernel(float(t), x, self.params))

    def conserved(self, t, x):
        x = self._vec(x)
        self._check(t, x)
        return np.asarray(self.conserved_kernel(float(t), x, self.params))

    def grad_conserved(self, t, x):
        """``d psi / d x`` as an (m, n) array; central differences when no
        analytic gradient is attached."""
        x = self._vec(x)
        self._check(t, x)
        if self.grad_kernel is not None:
            return np.asarray(self.grad_kernel(float(t), x, self.params))
        out = np.empty((self.m, self.n))
        for j in range(self.n):
            col, status = _partial_fd(
                self.conserved_kernel, self.domain_kernel, float(t), x, j, self.params
            )
            raise_for_status(status, f"{self.name}: finite difference left the domain")
            out[:, j] = col
        return out


@dataclass(frozen=True)
class MultiplierMatrix:
    matrix: np.ndarray
    degenerate_columns: frozenset = frozenset()


def telescoping_multiplier(sys, t, x_new, x_old, deg_tol=DEG_RTOL):
    """Build the m x n discrete multiplier between two states.

    ``deg_tol`` is relative: column ``j`` falls back to the midpoint partial
    derivative when ``|x_new_j - x_old_j| < deg_tol * max(1, |x_new_j|, |x_old_j|)``.
    """
    x_new = sys._vec(x_new)
    x_old = sys._vec(x_old)
    lam, degenerate, status = _telescoping(
        sys.conserved_kernel,
        sys.domain_kernel,
        sys.grad_or_dummy,
        sys.has_grad,
        sys.increments_kernel,
        sys.m,
        float(t),
        x_new,
        x_old,
        sys.params,
        float(deg_tol),
    )
    raise_for_status(status, f"{sys.name}: telescoping path left the domain")
    return MultiplierMatrix(lam, frozenset(int(j) for j in np.flatnonzero(degenerate)))


def check_chain_rule(lam, sys, t, x_new, x_old):
    """``lam @ (x_new - x_old) - [psi(t, x_new) - psi(t, x_old)]``."""
    matrix = lam.matrix if isinstance(lam, MultiplierMatrix) else np.asarray(lam)
    x_new = sys._vec(x_new)
    x_old = sys._vec(x_old)
    dpsi = sys.conserved(t, x_new) - sys.conserved(t, x_old)
    return matrix @ (x_new - x_old) - dpsi


def discrete_time_partial(sys, t_k, t_next, x_new):
    if not t_next > t_k:
        raise InvalidParams("t_next must exceed t_k")
    if not sys.time_dependent:
        return np.zeros(sys.m)
    x_new = sys._vec(x_new)
    sys._check(t_next, x_new)
    return _time_partial(
        sys.conserved_kernel, True, sys.m, float(t_k), float(t_next), x_new, sys.params
    )


def residual(lam, f_tau, dt_psi):
    """``lam @ f_tau + dt_psi``: the defect of the second multiplier condition."""
    matrix = lam.matrix if isinstance(lam, MultiplierMatrix) else np.asarray(lam)
    return matrix @ np.asarray(f_tau, dtype=float) + np.asarray(dt_psi, dtype=float)
