import numpy as np
import pytest

from conservo import SystemSpec
from conservo._jit import matrix_kernel, predicate_kernel, vector_kernel


# rotation: x' = -y, y' = x, psi = x^2 + y^2; exact solution is a rotation
@vector_kernel
def rot_source(t, x, p):
    return np.array([-x[1], x[0]])


@vector_kernel
def rot_psi(t, x, p):
    return np.array([x[0] * x[0] + x[1] * x[1]])


@matrix_kernel
def rot_grad(t, x, p):
    out = np.empty((1, 2))
    out[0, 0] = 2.0 * x[0]
    out[0, 1] = 2.0 * x[1]
    return out


@predicate_kernel
def anywhere(t, x, p):
    return True


@vector_kernel
def zero_source(t, x, p):
    return np.zeros(x.shape[0])


@vector_kernel
def first_coordinate(t, x, p):
    return np.array([x[0]])


# free rigid body: x' = x cross (I^-1 x), two quadratic invariants
@vector_kernel
def body_source(t, x, p):
    w = x / p
    return np.array([x[1] * w[2] - x[2] * w[1],
                     x[2] * w[0] - x[0] * w[2],
                     x[0] * w[1] - x[1] * w[0]])


@vector_kernel
def body_psi(t, x, p):
    return np.array([0.5 * np.sum(x * x / p), np.sum(x * x)])


# harmonic oscillator with unit frequency
@vector_kernel
def sho_source(t, x, p):
    return np.array([x[1], -x[0]])


def rotation_system(with_grad=True):
    return SystemSpec(
        name="rotation",
        n=2,
        m=1,
        source_kernel=rot_source,
        conserved_kernel=rot_psi,
        domain_kernel=anywhere,
        params=np.zeros(1),
        grad_kernel=rot_grad if with_grad else None,
    )


def rotation_exact(x0, t):
    c, s = np.cos(t), np.sin(t)
    return np.array([c * x0[0] - s * x0[1], s * x0[0] + c * x0[1]])


def zero_system(n=3):
    return SystemSpec("zero", n, 1, zero_source, first_coordinate, anywhere, np.zeros(1))


def rigid_body(inertia=(1.0, 2.0, 3.0)):
    return SystemSpec("rigid_body", 3, 2, body_source, body_psi, anywhere,
                      np.asarray(inertia, dtype=float))


def oscillator():
    return SystemSpec("oscillator", 2, 1, sho_source, rot_psi, anywhere, np.zeros(1))


@pytest.fixture
def rotation():
    return rotation_system()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance results: criterion -> list of (ok, detail), printed after the run
ACCEPTANCE = {}


def record(criterion, ok, detail):
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE, key=lambda c: (len(c), c)):
        parts = ACCEPTANCE[criterion]
        ok = all(p[0] for p in parts)
        detail = "; ".join(d for _ok, d in parts)
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
