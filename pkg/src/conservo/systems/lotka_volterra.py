"""Two- and three-species Lotka-Volterra systems."""

from dataclasses import dataclass, field

import numpy as np

from .._jit import matrix_kernel, predicate_kernel, vector_kernel
from ..errors import InvalidParams
from ..multiplier import SystemSpec


@dataclass(frozen=True)
class Lv2Params:
    a: float = 1.0
    b: float = 2.0
    c: float = 3.0
    d: float = 4.0

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) <= 0:
            raise InvalidParams("Lotka-Volterra rates must be positive")


@vector_kernel
def _lv2_source(t, x, p):
    a, b, c, d = p[0], p[1], p[2], p[3]
    return np.array([x[0] * (a - b * x[1]), x[1] * (d * x[0] - c)])


@vector_kernel
def _lv2_conserved(t, x, p):
    a, b, c, d = p[0], p[1], p[2], p[3]
    return np.array([a * np.log(x[1]) - b * x[1] + c * np.log(x[0]) - d * x[0]])


@matrix_kernel
def _lv2_grad(t, x, p):
    a, b, c, d = p[0], p[1], p[2], p[3]
    out = np.empty((1, 2))
    out[0, 0] = c / x[0] - d
    out[0, 1] = a / x[1] - b
    return out


@predicate_kernel
def _positive(t, x, p):
    for v in x:
        if not v > 0.0:
            return False
    return True


def _log_dd(new, old):
    # divided difference of log; the derivative when the points coincide
    if new == old:
        return 1.0 / new
    return (np.log(new) - np.log(old)) / (new - old)


def make_lv2(p=None):
    p = p or Lv2Params()
    a, b, c, d = p.a, p.b, p.c, p.d

    def analytic_multiplier(t, x_new, x_old):
        # psi is separable, so the divided differences are one-dimensional
        return np.array([[
            c * _log_dd(x_new[0], x_old[0]) - d,
            a * _log_dd(x_new[1], x_old[1]) - b,
        ]])

    return SystemSpec(
        name="lv2",
        n=2,
        m=1,
        source_kernel=_lv2_source,
        conserved_kernel=_lv2_conserved,
        domain_kernel=_positive,
        params=np.array([a, b, c, d]),
        grad_kernel=_lv2_grad,
        analytic_multiplier=analytic_multiplier,
        conserved_names=("psi",),
        info={"fixed_point": (c / d, a / b)},
    )


def _paper_lv3_interaction():
    return np.array([[0.0, 3.0, -2.0], [-3.0, 0.0, 1.0], [2.0, -1.0, 0.0]])


@dataclass(frozen=True)
class Lv3Params:
    interaction: np.ndarray = field(default_factory=_paper_lv3_interaction)
    fixed_point: np.ndarray = field(default_factory=lambda: np.ones(3))
    d_diag: np.ndarray = field(default_factory=lambda: np.ones(3))
    eta: np.ndarray = field(default_factory=lambda: np.array([1.0, 2.0, 3.0]))

    def check(self, tol=1e-12):
        """Raise unless ``D A + A^T D = 0`` and ``eta^T A = 0``."""
        a = np.asarray(self.interaction, dtype=float)
        d = np.diag(np.asarray(self.d_diag, dtype=float))
        skew = d @ a + a.T @ d
        left_null = np.asarray(self.eta, dtype=float) @ a
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(np.abs(skew)) > tol * scale or np.max(np.abs(left_null)) > tol * scale:
            raise InvalidParams(
                f"LV3 parameters do not admit both invariants: "
                f"|DA + A^T D| = {np.max(np.abs(skew)):.3e}, |eta^T A| = {np.max(np.abs(left_null)):.3e}"
            )


@vector_kernel
def _lv3_source(t, x, p):
    a = p[0:9].reshape((3, 3))
    xi = p[9:12]
    return x * (a @ (x - xi))


@vector_kernel
def _lv3_conserved(t, x, p):
    xi = p[9:12]
    d = p[12:15]
    eta = p[15:18]
    out = np.empty(2)
    out[0] = np.sum(d * (x - xi * np.log(x)))
    out[1] = x[0] ** eta[0] * x[1] ** eta[1] * x[2] ** eta[2]
    return out


@matrix_kernel
def _lv3_grad(t, x, p):
    xi = p[9:12]
    d = p[12:15]
    eta = p[15:18]
    prod = x[0] ** eta[0] * x[1] ** eta[1] * x[2] ** eta[2]
    out = np.empty((2, 3))
    out[0] = d * (1.0 - xi / x)
    out[1] = prod * eta / x
    return out


def make_lv3(p=None):
    p = p or Lv3Params()
    p.check()
    params = np.concatenate([
        np.asarray(p.interaction, dtype=float).ravel(),
        np.asarray(p.fixed_point, dtype=float),
        np.asarray(p.d_diag, dtype=float),
        np.asarray(p.eta, dtype=float),
    ])
    return SystemSpec(
        name="lv3",
        n=3,
        m=2,
        source_kernel=_lv3_source,
        conserved_kernel=_lv3_conserved,
        domain_kernel=_positive,
        params=params,
        grad_kernel=_lv3_grad,
        conserved_names=("psi_1", "psi_2"),
    )
