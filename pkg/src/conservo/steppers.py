"""Single-step integrators and the compiled trajectory loop.

MN-DMM steps solve ``x = y + tau * f_mn(t, x, y)`` by fixed-point iteration,
where ``f_mn`` is the minimal-norm correction of a consistent base scheme
onto the affine set ``{g : lam g = -dt_psi}``.  Three ways of applying the
pseudoinverse are available:

``direct``     explicit ``A^T (A A^T)^{-1}``
``mixed``      solve ``(A A^T) g = r`` then subtract ``A^T g``
``mixed_svd``  Jacobi SVD of ``A``, then ``V diag(1/sigma) U^T r``

RK4 and implicit midpoint are kept as baselines.
"""

from dataclasses import dataclass

import numpy as np

from ._jit import BOOL, BOOL_FN, F64, I64, INCR_FN, MAT_FN, VEC, VEC_FN, njit
from .errors import DOMAIN, NONFINITE, OK, SINGULAR, InvalidParams, raise_for_status
from .linalg import (
    _cond_2,
    _pinv_normal,
    _solve_sym,
    _svd_rank_ok,
    _svd_thin,
)
from .multiplier import DEG_RTOL, MultiplierMatrix, _telescoping, _time_partial

DIRECT, MIXED, MIXED_SVD, RK4, IMPLICIT_MIDPOINT = 0, 1, 2, 3, 4
VARIANTS = {
    "direct": DIRECT,
    "mixed": MIXED,
    "mixed_svd": MIXED_SVD,
    "rk4": RK4,
    "implicit_midpoint": IMPLICIT_MIDPOINT,
}
MN_VARIANTS = ("direct", "mixed", "mixed_svd")

IMPROVED_EULER, TRAPEZOIDAL = 0, 1
BASE_SCHEMES = {"improved_euler": IMPROVED_EULER, "trapezoidal": TRAPEZOIDAL}

M2_DET_RTOL = 1e-28


@dataclass(frozen=True)
class StepperConfig:
    tau: float
    delta: float = 1e-15
    epsilon: float = 1e-15
    max_iters: int = 20
    variant: str = "direct"
    base_scheme: str = "improved_euler"
    fast_path: bool = False
    deg_rtol: float = DEG_RTOL

    def __post_init__(self):
        if not (self.tau > 0 and self.delta > 0 and self.epsilon > 0):
            raise InvalidParams("tau, delta and epsilon must be positive")
        if int(self.max_iters) < 1:
            raise InvalidParams("max_iters must be >= 1")
        if self.variant not in VARIANTS:
            raise InvalidParams(
                f"unknown variant {self.variant!r}; valid: {', '.join(VARIANTS)}"
            )
        if self.base_scheme not in BASE_SCHEMES:
            raise InvalidParams(
                f"unknown base scheme {self.base_scheme!r}; valid: {', '.join(BASE_SCHEMES)}"
            )

    @property
    def variant_code(self):
        return VARIANTS[self.variant]

    @property
    def base_code(self):
        return BASE_SCHEMES[self.base_scheme]


@dataclass(frozen=True)
class StepDiagnostics:
    """Per-step record.

    ``residual_norm`` is the final fixed-point increment
    ``max|x_i - x_{i-1}|``; ``kappa`` is the largest condition number seen
    over the iterations (``cond(B)`` for direct/mixed, ``cond(A)`` for
    mixed_svd, exactly 1.0 when m == 1, NaN for RK4 and midpoint).
    """

    iterations: int
    converged: bool
    psi_defect: np.ndarray
    residual_norm: float
    kappa: float


# ------------------------------------------------------ correction kernels


@njit
def _mn_m1(row, f_tau, dt_psi):
    nrm2 = np.dot(row, row)
    if not nrm2 > 1e-300:
        return f_tau.copy(), SINGULAR
    coef = (np.dot(row, f_tau) + dt_psi) / nrm2
    return f_tau - coef * row, OK


@njit
def _mn_m2(r1, r2, f_tau, dt1, dt2):
    n11 = np.dot(r1, r1)
    n22 = np.dot(r2, r2)
    n12 = np.dot(r1, r2)
    det = n11 * n22 - n12 * n12
    if not det > M2_DET_RTOL * n11 * n22:
        return f_tau.copy(), SINGULAR
    c1 = np.dot(r1, f_tau) + dt1
    c2 = np.dot(r2, f_tau) + dt2
    g1 = (n22 * c1 - n12 * c2) / det
    g2 = (n11 * c2 - n12 * c1) / det
    return f_tau - g1 * r1 - g2 * r2, OK


@njit
def _kappa_2x2(lam, variant):
    n11 = np.dot(lam[0], lam[0])
    n22 = np.dot(lam[1], lam[1])
    n12 = np.dot(lam[0], lam[1])
    half_tr = 0.5 * (n11 + n22)
    disc = np.sqrt(max(0.0, 0.25 * (n11 - n22) ** 2 + n12 * n12))
    big = half_tr + disc
    small = (n11 * n22 - n12 * n12) / big
    if not small > 1e-300:
        return np.inf
    if variant == MIXED_SVD:
        return np.sqrt(big / small)
    return big / small


@njit
def _mn_correct(lam, f_tau, dt_psi, variant, fast_path):
    """Return ``(f_mn, kappa, status)``."""
    m = lam.shape[0]
    if fast_path and m == 1:
        f_mn, status = _mn_m1(lam[0], f_tau, dt_psi[0])
        return f_mn, 1.0, status
    if fast_path and m == 2:
        f_mn, status = _mn_m2(lam[0], lam[1], f_tau, dt_psi[0], dt_psi[1])
        return f_mn, _kappa_2x2(lam, variant), status

    r = lam @ f_tau + dt_psi
    kappa = 1.0
    if variant == DIRECT:
        a_pinv, b, status = _pinv_normal(lam)
        if status != OK:
            return f_tau.copy(), np.inf, status
        f_mn = f_tau - a_pinv @ r
        if m > 1:
            kappa, _ = _cond_2(b)
    elif variant == MIXED:
        b = lam @ lam.T
        g, status = _solve_sym(b, r)
        if status != OK:
            return f_tau.copy(), np.inf, status
        f_mn = f_tau - lam.T @ g
        if m > 1:
            kappa, _ = _cond_2(b)
    else:
        u, sigma, v, status = _svd_thin(lam)
        if status != OK:
            return f_tau.copy(), np.inf, status
        if not _svd_rank_ok(sigma):
            return f_tau.copy(), np.inf, SINGULAR
        b_coef = (u.T @ r) / sigma
        f_mn = f_tau - v @ b_coef
        if m > 1:
            kappa = sigma[0] / sigma[-1]
    return f_mn, kappa, OK


# ------------------------------------------------------------ step kernels


@njit
def _finite(x):
    for v in x:
        if not np.isfinite(v):
            return False
    return True


@njit
def _max_abs_diff(a, b):
    out = 0.0
    for i in range(a.shape[0]):
        d = abs(a[i] - b[i])
        if d > out:
            out = d
    return out


@njit((VEC_FN, BOOL_FN, VEC, F64, VEC, F64))
def _heun(f, domain, p, t, y, tau):
    """Improved Euler increment ``(f(t, y) + f(t + tau, y + tau f(t, y))) / 2``."""
    if not domain(t, y, p):
        return np.zeros_like(y), DOMAIN
    f0 = f(t, y, p)
    y1 = y + tau * f0
    if not _finite(y1) or not domain(t + tau, y1, p):
        return np.zeros_like(y), DOMAIN
    f1 = f(t + tau, y1, p)
    return 0.5 * (f0 + f1), OK


@njit
def _defect(psi, domain, p, t, x, psi_ref):
    if not domain(t, x, p):
        return np.full(psi_ref.shape[0], np.nan), DOMAIN
    return np.abs(psi(t, x, p) - psi_ref), OK


@njit((VEC_FN, VEC_FN, BOOL_FN, MAT_FN, BOOL, INCR_FN, VEC, I64, BOOL,
       F64, VEC, F64, VEC, F64, F64, I64, I64, I64, BOOL, F64))
def _step_mn(f, psi, domain, grad, has_grad, incr, p, m, time_dep,
             t, y, tau, psi_ref, delta, eps, max_iters,
             variant, base, fast_path, deg_rtol):
    """One MN-DMM step.

    Converged means both ``|psi(x_i) - psi_ref| < delta`` and
    ``max|x_i - x_{i-1}| < eps``.  When ``max_iters`` is reached first, the
    latest iterate that met the delta test is returned (the last iterate if
    none did), flagged as not converged.

    Returns ``(x, iterations, converged, kappa_max, defect, increment, status)``.
    """
    t_next = t + tau
    heun, status = _heun(f, domain, p, t, y, tau)
    defect = np.full(m, np.nan)
    if status != OK:
        return y.copy(), 0, False, np.nan, defect, np.nan, status
    f_old = f(t, y, p)
    x = y + tau * heun
    kappa_max = 1.0 if m == 1 else 0.0
    increment = np.inf
    converged = False
    # latest iterate that passed the level-set test, returned if the cap is hit
    on_level = False
    x_level = x
    defect_level = defect
    increment_level = increment
    it = 0
    for it in range(1, max_iters + 1):
        x_prev = x
        lam, _deg, status = _telescoping(psi, domain, grad, has_grad, incr, m,
                                         t, x_prev, y, p, deg_rtol)
        if status != OK:
            return x_prev, it, False, kappa_max, defect, increment, status
        if base == IMPROVED_EULER:
            s = heun
        else:
            if not domain(t_next, x_prev, p):
                return x_prev, it, False, kappa_max, defect, increment, DOMAIN
            s = 0.5 * (f_old + f(t_next, x_prev, p))
        if time_dep:
            if not domain(t_next, x_prev, p):
                return x_prev, it, False, kappa_max, defect, increment, DOMAIN
        dt_psi = _time_partial(psi, time_dep, m, t, t_next, x_prev, p)
        f_mn, kappa, status = _mn_correct(lam, s, dt_psi, variant, fast_path)
        if status != OK:
            return x_prev, it, False, kappa_max, defect, increment, status
        if m > 1 and kappa > kappa_max:
            kappa_max = kappa
        x = y + tau * f_mn
        if not _finite(x):
            return x, it, False, kappa_max, defect, increment, NONFINITE
        defect, status = _defect(psi, domain, p, t_next, x, psi_ref)
        if status != OK:
            return x, it, False, kappa_max, defect, increment, status
        increment = _max_abs_diff(x, x_prev)
        if defect.max() < delta:
            if increment < eps:
                converged = True
                break
            on_level = True
            x_level = x
            defect_level = defect
            increment_level = increment
    if not converged and on_level:
        return x_level, it, False, kappa_max, defect_level, increment_level, OK
    return x, it, converged, kappa_max, defect, increment, OK


@njit((VEC_FN, BOOL_FN, VEC, F64, VEC, F64))
def _step_rk4(f, domain, p, t, y, tau):
    h2 = 0.5 * tau
    if not domain(t, y, p):
        return y.copy(), DOMAIN
    k1 = f(t, y, p)
    y2 = y + h2 * k1
    if not _finite(y2) or not domain(t + h2, y2, p):
        return y2, DOMAIN
    k2 = f(t + h2, y2, p)
    y3 = y + h2 * k2
    if not _finite(y3) or not domain(t + h2, y3, p):
        return y3, DOMAIN
    k3 = f(t + h2, y3, p)
    y4 = y + tau * k3
    if not _finite(y4) or not domain(t + tau, y4, p):
        return y4, DOMAIN
    k4 = f(t + tau, y4, p)
    x = y + (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not _finite(x):
        return x, NONFINITE
    return x, OK


@njit((VEC_FN, BOOL_FN, VEC, F64, VEC, F64, F64, I64))
def _step_midpoint(f, domain, p, t, y, tau, eps, max_iters):
    """Returns ``(x, iterations, converged, increment, status)``."""
    heun, status = _heun(f, domain, p, t, y, tau)
    if status != OK:
        return y.copy(), 0, False, np.nan, status
    x = y + tau * heun
    t_mid = t + 0.5 * tau
    increment = np.inf
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        x_prev = x
        mid = 0.5 * (x_prev + y)
        if not domain(t_mid, mid, p):
            return x_prev, it, False, increment, DOMAIN
        x = y + tau * f(t_mid, mid, p)
        if not _finite(x):
            return x, it, False, increment, NONFINITE
        increment = _max_abs_diff(x, x_prev)
        if increment < eps:
            converged = True
            break
    return x, it, converged, increment, OK


@njit((VEC_FN, VEC_FN, BOOL_FN, MAT_FN, BOOL, INCR_FN, VEC, I64, BOOL,
       VEC, F64, F64, I64, F64, I64, F64, F64, I64, I64, I64, BOOL, F64))
def _integrate(f, psi, domain, grad, has_grad, incr, p, m, time_dep,
               x0, t0, tau, n_steps, last_tau, decimate,
               delta, eps, max_iters, method, base, fast_path, deg_rtol):
    """Run ``n_steps`` steps; the last one has length ``last_tau``.

    Stored states are every ``decimate``-th step plus the final one; the
    per-step diagnostics cover every step.
    """
    n = x0.shape[0]
    n_store = n_steps // decimate + 2
    times = np.empty(n_store)
    states = np.empty((n_store, n))
    store_idx = np.empty(n_store, dtype=np.int64)
    iters = np.zeros(n_steps, dtype=np.int64)
    conv = np.zeros(n_steps, dtype=np.bool_)
    kappa = np.full(n_steps, np.nan)
    incr_norm = np.full(n_steps, np.nan)
    defect = np.full((n_steps, m), np.nan)

    psi_ref = psi(t0, x0, p)
    times[0] = t0
    states[0] = x0
    store_idx[0] = 0
    n_stored = 1
    y = x0.copy()
    t = t0
    status = OK
    done = 0
    for k in range(n_steps):
        h = tau if k < n_steps - 1 else last_tau
        if method == RK4:
            x, status = _step_rk4(f, domain, p, t, y, h)
            if status == OK:
                d, status = _defect(psi, domain, p, t + h, x, psi_ref)
                defect[k] = d
                conv[k] = True
        elif method == IMPLICIT_MIDPOINT:
            x, it, ok, inc, status = _step_midpoint(f, domain, p, t, y, h, eps, max_iters)
            iters[k] = it
            conv[k] = ok
            incr_norm[k] = inc
            if status == OK:
                d, status = _defect(psi, domain, p, t + h, x, psi_ref)
                defect[k] = d
        else:
            x, it, ok, kap, d, inc, status = _step_mn(
                f, psi, domain, grad, has_grad, incr, p, m, time_dep,
                t, y, h, psi_ref, delta, eps, max_iters,
                method, base, fast_path, deg_rtol)
            iters[k] = it
            conv[k] = ok
            kappa[k] = kap
            incr_norm[k] = inc
            defect[k] = d
        if status != OK:
            break
        done = k + 1
        t = t0 + done * tau if done < n_steps else t + h
        y = x
        if done % decimate == 0 or done == n_steps:
            times[n_stored] = t
            states[n_stored] = y
            store_idx[n_stored] = done
            n_stored += 1
    if status != OK and store_idx[n_stored - 1] != done:
        # keep the last good state of a truncated run
        times[n_stored] = t
        states[n_stored] = y
        store_idx[n_stored] = done
        n_stored += 1
    return (times[:n_stored], states[:n_stored], store_idx[:n_stored],
            iters, conv, kappa, incr_norm, defect, psi_ref, done, status)


# ------------------------------------------------------------ public API


def _kernel_args(sys):
    return (
        sys.source_kernel,
        sys.conserved_kernel,
        sys.domain_kernel,
        sys.grad_or_dummy,
        sys.has_grad,
        sys.increments_kernel,
        sys.params,
    )


def _vec(x):
    return np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1))


def predictor_improved_euler(sys, t, y, tau):
    y = sys._vec(y)
    heun, status = _heun(sys.source_kernel, sys.domain_kernel, sys.params, float(t), y, float(tau))
    raise_for_status(status, f"{sys.name}: improved Euler predictor")
    return y + tau * heun


def base_scheme_f_tau(sys, t, x_new, x_old, tau, scheme="improved_euler"):
    """Consistent approximation of f over the step; ``improved_euler`` ignores
    ``x_new``, ``trapezoidal`` averages ``f(t, x_old)`` and ``f(t + tau, x_new)``."""
    x_old = sys._vec(x_old)
    if scheme == "improved_euler":
        heun, status = _heun(
            sys.source_kernel, sys.domain_kernel, sys.params, float(t), x_old, float(tau)
        )
        raise_for_status(status, f"{sys.name}: base scheme")
        return heun
    if scheme == "trapezoidal":
        return 0.5 * (sys.source(t, x_old) + sys.source(t + tau, x_new))
    raise InvalidParams(f"unknown base scheme {scheme!r}")


def mn_correct(lam, f_tau, dt_psi, variant="direct"):
    """Minimal-norm correction ``f_tau - lam^+ (lam f_tau + dt_psi)``.

    Returns ``(f_mn, kappa)``.
    """
    matrix = lam.matrix if isinstance(lam, MultiplierMatrix) else lam
    matrix = np.ascontiguousarray(np.atleast_2d(np.asarray(matrix, dtype=float)))
    if variant not in MN_VARIANTS:
        raise InvalidParams(f"unknown MN-DMM variant {variant!r}; valid: {', '.join(MN_VARIANTS)}")
    dt = _vec(dt_psi)
    f_mn, kappa, status = _mn_correct(matrix, _vec(f_tau), dt, VARIANTS[variant], False)
    raise_for_status(status, f"mn_correct({variant})")
    return f_mn, float(kappa)


def mn_correct_m1(dpsi_dx, f_tau, dt_psi):
    """Closed form for a single conserved quantity."""
    f_mn, status = _mn_m1(_vec(dpsi_dx), _vec(f_tau), float(dt_psi))
    raise_for_status(status, "mn_correct_m1: divided-difference vector vanishes")
    return f_mn


def mn_correct_m2(rows, f_tau, dt_psi):
    """Closed form (2 x 2 adjugate) for two conserved quantities."""
    r1, r2 = (_vec(r) for r in rows)
    dt = _vec(dt_psi)
    f_mn, status = _mn_m2(r1, r2, _vec(f_tau), dt[0], dt[1])
    raise_for_status(status, "mn_correct_m2: rows are numerically parallel")
    return f_mn


def step_mn(sys, cfg, t, y, psi_ref):
    """Advance one MN-DMM step; returns ``(x_next, StepDiagnostics)``."""
    if cfg.variant not in MN_VARIANTS:
        raise InvalidParams(f"step_mn needs an MN-DMM variant, got {cfg.variant!r}")
    x, it, ok, kap, defect, inc, status = _step_mn(
        *_kernel_args(sys), sys.m, sys.time_dependent,
        float(t), sys._vec(y), float(cfg.tau), _vec(psi_ref),
        float(cfg.delta), float(cfg.epsilon), int(cfg.max_iters),
        cfg.variant_code, cfg.base_code, bool(cfg.fast_path), float(cfg.deg_rtol),
    )
    raise_for_status(status, f"{sys.name}: MN-DMM step at t={t}")
    return x, StepDiagnostics(int(it), bool(ok), defect, float(inc), float(kap))


def step_rk4(sys, t, y, tau):
    x, status = _step_rk4(
        sys.source_kernel, sys.domain_kernel, sys.params, float(t), sys._vec(y), float(tau)
    )
    raise_for_status(status, f"{sys.name}: RK4 step at t={t}")
    return x


def step_implicit_midpoint(sys, cfg, t, y, psi_ref):
    x, it, ok, inc, status = _step_midpoint(
        sys.source_kernel, sys.domain_kernel, sys.params, float(t), sys._vec(y),
        float(cfg.tau), float(cfg.epsilon), int(cfg.max_iters),
    )
    raise_for_status(status, f"{sys.name}: implicit midpoint step at t={t}")
    defect = np.abs(sys.conserved(t + cfg.tau, x) - _vec(psi_ref))
    return x, StepDiagnostics(int(it), bool(ok), defect, float(inc), float("nan"))
