"""Geodesics of the Schwarzschild metric, signature (+, -, -, -).

State ``(t, r, theta, phi, t', r', theta', phi')``.  Conserved: the speed
``S = g_ij y^i y^j``, the energy ``E = (1 - r_s/r) t'`` and the three
angular-momentum components.
"""

from dataclasses import dataclass

import numpy as np

from .._jit import matrix_kernel, njit, predicate_kernel, vector_kernel
from ..errors import DomainViolation, InvalidParams, SingularMatrix
from ..multiplier import SystemSpec

HORIZON_RTOL = 1e-12
AXIS_TOL = 1e-12
PAPER_X0 = (0.0, 37.338379348829989, np.pi / 2, 3.006861595479139)
PAPER_Y0 = (1.0, -0.990937492340824, 0.0, 0.003597472991852)


@dataclass(frozen=True)
class SchwarzschildParams:
    r_s: float = 2.0

    def __post_init__(self):
        if not self.r_s > 0:
            raise InvalidParams("r_s must be positive")


@njit
def _christoffel(r_s, x):
    r = x[1]
    th = x[2]
    s, c = np.sin(th), np.cos(th)
    gam = np.zeros((4, 4, 4))
    a = r_s / (2.0 * r * (r - r_s))
    gam[0, 0, 1] = gam[0, 1, 0] = a
    gam[1, 0, 0] = r_s * (r - r_s) / (2.0 * r ** 3)
    gam[1, 1, 1] = -a
    gam[1, 2, 2] = -(r - r_s)
    gam[1, 3, 3] = -(r - r_s) * s * s
    gam[2, 1, 2] = gam[2, 2, 1] = 1.0 / r
    gam[2, 3, 3] = -s * c
    gam[3, 1, 3] = gam[3, 3, 1] = 1.0 / r
    gam[3, 2, 3] = gam[3, 3, 2] = c / s
    return gam


@vector_kernel
def _source(t, x, p):
    r_s = p[0]
    r, th = x[1], x[2]
    tp, rp, thp, php = x[4], x[5], x[6], x[7]
    s, c = np.sin(th), np.cos(th)
    a = r_s / (2.0 * r * (r - r_s))
    out = np.empty(8)
    out[0] = tp
    out[1] = rp
    out[2] = thp
    out[3] = php
    out[4] = -2.0 * a * tp * rp
    out[5] = -(r_s * (r - r_s) / (2.0 * r ** 3) * tp * tp - a * rp * rp
               - (r - r_s) * thp * thp - (r - r_s) * s * s * php * php)
    out[6] = -(2.0 / r * rp * thp - s * c * php * php)
    out[7] = -(2.0 / r * rp * php + 2.0 * c / s * thp * php)
    return out


@vector_kernel
def _conserved(t, x, p):
    r_s = p[0]
    r, th, ph = x[1], x[2], x[3]
    tp, rp, thp, php = x[4], x[5], x[6], x[7]
    s, c = np.sin(th), np.cos(th)
    sp, cp = np.sin(ph), np.cos(ph)
    lapse = 1.0 - r_s / r
    r2 = r * r
    out = np.empty(5)
    out[0] = lapse * tp * tp - rp * rp / lapse - r2 * thp * thp - r2 * s * s * php * php
    out[1] = lapse * tp
    out[2] = r2 * s * s * php
    out[3] = r2 * (cp * thp - s * c * sp * php)
    out[4] = r2 * (sp * thp + s * c * cp * php)
    return out


@matrix_kernel
def _grad(t, x, p):
    r_s = p[0]
    r, th, ph = x[1], x[2], x[3]
    tp, rp, thp, php = x[4], x[5], x[6], x[7]
    s, c = np.sin(th), np.cos(th)
    sp, cp = np.sin(ph), np.cos(ph)
    lapse = 1.0 - r_s / r
    dlapse = r_s / (r * r)
    r2 = r * r
    sc = s * c
    c2 = c * c - s * s
    out = np.zeros((5, 8))
    # S
    out[0, 1] = (dlapse * tp * tp + rp * rp * dlapse / (lapse * lapse)
                 - 2.0 * r * thp * thp - 2.0 * r * s * s * php * php)
    out[0, 2] = -2.0 * r2 * sc * php * php
    out[0, 4] = 2.0 * lapse * tp
    out[0, 5] = -2.0 * rp / lapse
    out[0, 6] = -2.0 * r2 * thp
    out[0, 7] = -2.0 * r2 * s * s * php
    # E
    out[1, 1] = dlapse * tp
    out[1, 4] = lapse
    # L_z
    out[2, 1] = 2.0 * r * s * s * php
    out[2, 2] = 2.0 * r2 * sc * php
    out[2, 7] = r2 * s * s
    # L_y
    out[3, 1] = 2.0 * r * (cp * thp - sc * sp * php)
    out[3, 2] = -r2 * c2 * sp * php
    out[3, 3] = r2 * (-sp * thp - sc * cp * php)
    out[3, 6] = r2 * cp
    out[3, 7] = -r2 * sc * sp
    # -L_x
    out[4, 1] = 2.0 * r * (sp * thp + sc * cp * php)
    out[4, 2] = r2 * c2 * cp * php
    out[4, 3] = r2 * (cp * thp - sc * sp * php)
    out[4, 6] = r2 * sp
    out[4, 7] = r2 * sc * cp
    return out


@predicate_kernel
def _domain(t, x, p):
    return x[1] > p[0] * (1.0 + HORIZON_RTOL) and abs(np.sin(x[2])) > AXIS_TOL


def metric(p, x):
    """Diagonal metric ``diag(1 - r_s/r, -(1 - r_s/r)^-1, -r^2, -r^2 sin^2 theta)``."""
    r, th = x[1], x[2]
    lapse = 1.0 - p.r_s / r
    return np.diag([lapse, -1.0 / lapse, -r * r, -(r * np.sin(th)) ** 2])


def christoffel_schwarzschild(p, x):
    """Closed-form ``Gamma[l, j, k]`` in Schwarzschild coordinates."""
    x = np.asarray(x, dtype=float)
    if not x[1] > p.r_s * (1.0 + HORIZON_RTOL):
        raise DomainViolation(f"r = {x[1]} is inside the horizon r_s = {p.r_s}")
    if not abs(np.sin(x[2])) > AXIS_TOL:
        raise DomainViolation("theta is on the polar axis")
    return _christoffel(float(p.r_s), np.ascontiguousarray(x[:4]))


def christoffel_fd_oracle(metric_fn, x, rel_step=1e-6):
    """``Gamma^l_jk = 1/2 g^lm (d_j g_mk + d_k g_mj - d_m g_jk)`` with metric
    derivatives from central differences."""
    x = np.asarray(x, dtype=float)
    dim = x.shape[0]
    g = np.asarray(metric_fn(x), dtype=float)
    if abs(np.linalg.det(g)) < 1e-300 or np.linalg.cond(g) > 1e14:
        raise SingularMatrix("metric is not invertible at x")
    g_inv = np.linalg.inv(g)
    dg = np.empty((dim, dim, dim))  # dg[a, m, k] = d_a g_mk
    for a in range(dim):
        h = rel_step * max(1.0, abs(x[a]))
        xp, xm = x.copy(), x.copy()
        xp[a] += h
        xm[a] -= h
        dg[a] = (np.asarray(metric_fn(xp)) - np.asarray(metric_fn(xm))) / (2.0 * h)
    lowered = dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg  # [m, j, k]
    return 0.5 * np.einsum("lm,mjk->ljk", g_inv, lowered)


def make_schwarzschild(p=None):
    p = p or SchwarzschildParams()
    return SystemSpec(
        name="schwarzschild",
        n=8,
        m=5,
        source_kernel=_source,
        conserved_kernel=_conserved,
        domain_kernel=_domain,
        params=np.array([p.r_s]),
        grad_kernel=_grad,
        conserved_names=("S", "E", "L_1", "L_2", "L_3"),
        info={"r_s": p.r_s},
    )
