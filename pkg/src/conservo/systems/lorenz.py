"""Lorenz system at sigma=1/3, rho=400, beta=0 with its time-dependent invariant

    psi(t, x) = (x^4 - 4/3 x^2 z - 4/9 y^2 - 8/9 x y + 1600/3 x^2) exp(4t/3)
"""

import numpy as np

from .._jit import matrix_kernel, predicate_kernel, vector_kernel
from ..multiplier import SystemSpec

SIGMA = 1.0 / 3.0
RHO = 400.0
BETA = 0.0


@vector_kernel
def _source(t, x, p):
    sigma, rho, beta = p[0], p[1], p[2]
    return np.array([
        sigma * (x[1] - x[0]),
        x[0] * (rho - x[2]) - x[1],
        x[0] * x[1] - beta * x[2],
    ])


@vector_kernel
def _conserved(t, x, p):
    a, b, c = x[0], x[1], x[2]
    poly = (a ** 4 - (4.0 / 3.0) * a * a * c - (4.0 / 9.0) * b * b
            - (8.0 / 9.0) * a * b + (1600.0 / 3.0) * a * a)
    return np.array([poly * np.exp(4.0 * t / 3.0)])


@matrix_kernel
def _grad(t, x, p):
    a, b, c = x[0], x[1], x[2]
    g = np.exp(4.0 * t / 3.0)
    out = np.empty((1, 3))
    out[0, 0] = (4.0 * a ** 3 - (8.0 / 3.0) * a * c - (8.0 / 9.0) * b + (3200.0 / 3.0) * a) * g
    out[0, 1] = (-(8.0 / 9.0) * b - (8.0 / 9.0) * a) * g
    out[0, 2] = -(4.0 / 3.0) * a * a * g
    return out


@predicate_kernel
def _domain(t, x, p):
    return True


def make_lorenz():
    return SystemSpec(
        name="lorenz",
        n=3,
        m=1,
        source_kernel=_source,
        conserved_kernel=_conserved,
        domain_kernel=_domain,
        params=np.array([SIGMA, RHO, BETA]),
        grad_kernel=_grad,
        time_dependent=True,
        conserved_names=("psi",),
    )
