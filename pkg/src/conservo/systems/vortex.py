"""N point vortices on the unit sphere.

State layout is ``(x_1, ..., x_N)`` with each ``x_i`` a 3-vector.  Conserved:
the momentum ``P = sum Gamma_i x_i`` and the Hamiltonian
``H = -1/(4 pi) sum_{i<j} Gamma_i Gamma_j log(1 - x_i . x_j)``; optionally
also ``|x_i|^2`` for every vortex.

``params = [N, include_norms, Gamma_1, ..., Gamma_N]``.
"""

from dataclasses import dataclass

import numpy as np

from .._jit import increments_kernel, matrix_kernel, njit, predicate_kernel, vector_kernel
from ..errors import DOMAIN, OK, DomainViolation, InvalidParams
from ..multiplier import SystemSpec

COINCIDENT_TOL = 1e-12
INV_4PI = 1.0 / (4.0 * np.pi)


@dataclass(frozen=True, eq=False)
class VortexParams:
    strengths: np.ndarray
    positions: np.ndarray
    rng_seed: int = 0
    include_norm_constraints: bool = False

    @property
    def count(self):
        return len(self.strengths)


def _unit_floats(bitgen, size):
    # 53 random bits mapped to the open interval (0, 1)
    raw = bitgen.random_raw(size)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def random_vortex_params(count, seed=0, include_norm_constraints=False):
    """Positions uniform on the sphere (normalized Box-Muller Gaussians) and
    strengths uniform on [-1, 1], from a Philox counter stream keyed by
    ``seed``."""
    bitgen = np.random.Philox(key=int(seed))
    n_normals = 3 * count
    n_pairs = (n_normals + 1) // 2
    u1 = _unit_floats(bitgen, n_pairs)
    u2 = _unit_floats(bitgen, n_pairs)
    rad = np.sqrt(-2.0 * np.log(u1))
    normals = np.empty(2 * n_pairs)
    normals[0::2] = rad * np.cos(2.0 * np.pi * u2)
    normals[1::2] = rad * np.sin(2.0 * np.pi * u2)
    pos = normals[:n_normals].reshape(count, 3)
    pos /= np.linalg.norm(pos, axis=1)[:, None]
    strengths = 2.0 * _unit_floats(bitgen, count) - 1.0
    return VortexParams(strengths, pos, int(seed), include_norm_constraints)


@vector_kernel
def _source(t, x, p):
    nv = int(p[0])
    gam = p[2:2 + nv]
    out = np.zeros(3 * nv)
    for i in range(nv):
        xi = x[3 * i:3 * i + 3]
        for j in range(nv):
            if j == i:
                continue
            xj = x[3 * j:3 * j + 3]
            w = INV_4PI * gam[j] / (1.0 - (xi[0] * xj[0] + xi[1] * xj[1] + xi[2] * xj[2]))
            out[3 * i] += w * (xj[1] * xi[2] - xj[2] * xi[1])
            out[3 * i + 1] += w * (xj[2] * xi[0] - xj[0] * xi[2])
            out[3 * i + 2] += w * (xj[0] * xi[1] - xj[1] * xi[0])
    return out


@njit
def _n_conserved(p):
    nv = int(p[0])
    return 4 + (nv if p[1] > 0.5 else 0)


@vector_kernel
def _conserved(t, x, p):
    nv = int(p[0])
    gam = p[2:2 + nv]
    out = np.zeros(_n_conserved(p))
    h = 0.0
    for i in range(nv):
        for c in range(3):
            out[c] += gam[i] * x[3 * i + c]
        for j in range(i + 1, nv):
            dot = x[3 * i] * x[3 * j] + x[3 * i + 1] * x[3 * j + 1] + x[3 * i + 2] * x[3 * j + 2]
            h += gam[i] * gam[j] * np.log(1.0 - dot)
    out[3] = -INV_4PI * h
    if p[1] > 0.5:
        for i in range(nv):
            out[4 + i] = x[3 * i] ** 2 + x[3 * i + 1] ** 2 + x[3 * i + 2] ** 2
    return out


@matrix_kernel
def _grad(t, x, p):
    nv = int(p[0])
    gam = p[2:2 + nv]
    out = np.zeros((_n_conserved(p), 3 * nv))
    for i in range(nv):
        for c in range(3):
            out[c, 3 * i + c] = gam[i]
        for j in range(nv):
            if j == i:
                continue
            dot = x[3 * i] * x[3 * j] + x[3 * i + 1] * x[3 * j + 1] + x[3 * i + 2] * x[3 * j + 2]
            w = INV_4PI * gam[i] * gam[j] / (1.0 - dot)
            for c in range(3):
                out[3, 3 * i + c] += w * x[3 * j + c]
        if p[1] > 0.5:
            for c in range(3):
                out[4 + i, 3 * i + c] = 2.0 * x[3 * i + c]
    return out


@predicate_kernel
def _domain(t, x, p):
    nv = int(p[0])
    for i in range(nv):
        for j in range(i + 1, nv):
            dot = x[3 * i] * x[3 * j] + x[3 * i + 1] * x[3 * j + 1] + x[3 * i + 2] * x[3 * j + 2]
            if not 1.0 - dot > COINCIDENT_TOL:
                return False
    return True


@increments_kernel
def _increments(psi, domain, t, x_new, x_old, p, out):
    """Path differences of psi in O(N^2) instead of O(N^3).

    Moving coordinate c of vortex i only changes the pairs (i, k); vortices
    before i sit at their new positions, those after at their old ones.
    """
    nv = int(p[0])
    gam = p[2:2 + nv]
    norms = p[1] > 0.5
    if not domain(t, x_old, p):
        return DOMAIN
    z = x_old.copy()
    out[:, :] = 0.0
    for i in range(nv):
        for c in range(3):
            j = 3 * i + c
            delta = x_new[j] - x_old[j]
            if delta == 0.0:
                continue
            acc = 0.0
            for k in range(nv):
                if k == i:
                    continue
                base = 1.0 - (z[3 * i] * z[3 * k] + z[3 * i + 1] * z[3 * k + 1]
                              + z[3 * i + 2] * z[3 * k + 2])
                moved = base - delta * z[3 * k + c]
                if not moved > COINCIDENT_TOL:
                    return DOMAIN
                acc += gam[k] * np.log1p(-delta * z[3 * k + c] / base)
            out[c, j] = gam[i] * delta
            out[3, j] = -INV_4PI * gam[i] * acc
            if norms:
                out[4 + i, j] = delta * (x_new[j] + x_old[j])
            z[j] = x_new[j]
    return OK


def make_point_vortex(p):
    strengths = np.asarray(p.strengths, dtype=float).ravel()
    positions = np.asarray(p.positions, dtype=float).reshape(-1, 3)
    nv = len(strengths)
    if positions.shape[0] != nv or nv < 2:
        raise InvalidParams("need at least two vortices and one position per strength")
    params = np.concatenate([[float(nv), 1.0 if p.include_norm_constraints else 0.0], strengths])
    x0 = np.ascontiguousarray(positions.ravel())
    if not _domain(0.0, x0, params):
        raise DomainViolation("coincident vortices in the initial configuration")
    m = 4 + (nv if p.include_norm_constraints else 0)
    names = ("P_x", "P_y", "P_z", "H") + tuple(
        f"norm_{i}" for i in range(nv if p.include_norm_constraints else 0)
    )
    return SystemSpec(
        name="vortex",
        n=3 * nv,
        m=m,
        source_kernel=_source,
        conserved_kernel=_conserved,
        domain_kernel=_domain,
        params=params,
        grad_kernel=_grad,
        increments_kernel=_increments,
        conserved_names=names,
        info={"x0": x0, "seed": p.rng_seed},
    )
