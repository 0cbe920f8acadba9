"""Planar restricted three-body problem in the rotating frame."""

import numpy as np

from .._jit import matrix_kernel, njit, predicate_kernel, vector_kernel
from ..errors import InvalidParams
from ..multiplier import SystemSpec

ARENSTORF_ALPHA = 0.012277471
ARENSTORF_PERIOD = 17.0652165601579625588917206249
ARENSTORF_X0 = (0.994, 0.0, 0.0, -2.00158510637908252240537862224)
SINGULARITY_RADIUS = 1e-8


@njit
def _distances(x, p):
    alpha, beta = p[0], p[1]
    d1 = np.sqrt((x[0] - beta) ** 2 + x[1] ** 2)
    d2 = np.sqrt((x[0] + alpha) ** 2 + x[1] ** 2)
    return d1, d2


@vector_kernel
def _source(t, x, p):
    alpha, beta = p[0], p[1]
    d1, d2 = _distances(x, p)
    c1 = alpha / d1 ** 3
    c2 = beta / d2 ** 3
    out = np.empty(4)
    out[0] = x[2]
    out[1] = x[3]
    out[2] = x[0] + 2.0 * x[3] - c1 * (x[0] - beta) - c2 * (x[0] + alpha)
    out[3] = x[1] - 2.0 * x[2] - c1 * x[1] - c2 * x[1]
    return out


@vector_kernel
def _jacobi(t, x, p):
    alpha, beta = p[0], p[1]
    d1, d2 = _distances(x, p)
    kin = 0.5 * (x[0] * x[0] + x[1] * x[1] - x[2] * x[2] - x[3] * x[3])
    return np.array([kin + alpha / d1 + beta / d2])


@matrix_kernel
def _jacobi_grad(t, x, p):
    alpha, beta = p[0], p[1]
    d1, d2 = _distances(x, p)
    c1 = alpha / d1 ** 3
    c2 = beta / d2 ** 3
    out = np.empty((1, 4))
    out[0, 0] = x[0] - c1 * (x[0] - beta) - c2 * (x[0] + alpha)
    out[0, 1] = x[1] - c1 * x[1] - c2 * x[1]
    out[0, 2] = -x[2]
    out[0, 3] = -x[3]
    return out


@predicate_kernel
def _domain(t, x, p):
    d1, d2 = _distances(x, p)
    return d1 > SINGULARITY_RADIUS and d2 > SINGULARITY_RADIUS


def make_three_body(alpha=ARENSTORF_ALPHA):
    if not 0.0 < alpha < 1.0:
        raise InvalidParams("alpha must lie in (0, 1)")
    return SystemSpec(
        name="arenstorf",
        n=4,
        m=1,
        source_kernel=_source,
        conserved_kernel=_jacobi,
        domain_kernel=_domain,
        params=np.array([alpha, 1.0 - alpha]),
        grad_kernel=_jacobi_grad,
        conserved_names=("J",),
        info={"period": ARENSTORF_PERIOD},
    )
