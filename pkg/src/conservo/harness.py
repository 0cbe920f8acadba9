"""Drive full integrations and reduce them to table-style summaries."""

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ._jit import I64, MAT, VEC, VEC_FN, njit
from .errors import OK, STATUS_NAMES, InvalidParams
from .steppers import MN_VARIANTS, RK4, VARIANTS, StepDiagnostics, StepperConfig, _integrate

STEP_COUNT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class StepLog:
    """Per-step diagnostics stored column-wise; indexing yields
    :class:`StepDiagnostics`."""

    iterations: np.ndarray
    converged: np.ndarray
    kappa: np.ndarray
    residual_norm: np.ndarray
    psi_defect: np.ndarray

    def __len__(self):
        return len(self.iterations)

    def __getitem__(self, k):
        return StepDiagnostics(
            int(self.iterations[k]),
            bool(self.converged[k]),
            self.psi_defect[k].copy(),
            float(self.residual_norm[k]),
            float(self.kappa[k]),
        )


@dataclass(eq=False)
class Trajectory:
    """Stored states (possibly decimated) plus diagnostics for every step.

    ``step_index[i]`` is the step number of ``states[i]``.  When the run was
    cut short, ``failure`` names the cause and ``failed_step`` the step that
    could not be completed.
    """

    times: np.ndarray
    states: np.ndarray
    step_index: np.ndarray
    diagnostics: StepLog
    psi_ref: np.ndarray
    method: str
    n_steps_planned: int
    failure: Optional[str] = None
    failed_step: Optional[int] = None
    wall_time: float = 0.0

    @property
    def truncated(self):
        return self.failure is not None


@dataclass
class ExperimentReport:
    method: str
    max_psi_defect: np.ndarray
    mean_fpi: Optional[float]
    max_kappa: Optional[float]
    wall_time: float
    nonconverged_steps: int
    n_steps: int
    failure: Optional[str] = None
    failed_step: Optional[int] = None
    names: tuple = field(default_factory=tuple)

    @property
    def failed(self):
        return self.failure is not None


def step_plan(t0, t_final, tau):
    """Return ``(n_steps, last_tau)``; the final step is shortened when the
    interval is not an integer multiple of ``tau``."""
    if not t_final > t0:
        raise InvalidParams("t_final must exceed t0")
    ratio = (t_final - t0) / tau
    whole = round(ratio)
    if whole >= 1 and abs(ratio - whole) <= STEP_COUNT_TOL * max(1.0, ratio):
        return int(whole), float(tau)
    full = math.floor(ratio)
    return int(full) + 1, float((t_final - t0) - full * tau)


def integrate(sys, cfg, x0, t0, t_final, decimate=1):
    """Integrate ``sys`` from ``(t0, x0)`` to ``t_final`` with ``cfg``.

    Domain violations and singular multipliers end the run early; the
    returned trajectory then carries ``failure`` instead of raising.
    """
    if int(decimate) < 1:
        raise InvalidParams("decimate must be >= 1")
    x0 = sys._vec(x0)
    if not sys.in_domain(t0, x0):
        raise InvalidParams(f"{sys.name}: initial state is outside the domain")
    n_steps, last_tau = step_plan(float(t0), float(t_final), float(cfg.tau))
    start = time.perf_counter()
    (times, states, idx, iters, conv, kappa, inc, defect, psi_ref, done, status) = _integrate(
        sys.source_kernel, sys.conserved_kernel, sys.domain_kernel, sys.grad_or_dummy,
        sys.has_grad, sys.increments_kernel, sys.params, sys.m, sys.time_dependent,
        x0, float(t0), float(cfg.tau), n_steps, last_tau, int(decimate),
        float(cfg.delta), float(cfg.epsilon), int(cfg.max_iters),
        cfg.variant_code, cfg.base_code, bool(cfg.fast_path), float(cfg.deg_rtol),
    )
    wall = time.perf_counter() - start
    log = StepLog(iters[:done], conv[:done], kappa[:done], inc[:done], defect[:done])
    failure = None if status == OK else STATUS_NAMES[int(status)]
    return Trajectory(
        times=times,
        states=states,
        step_index=idx,
        diagnostics=log,
        psi_ref=psi_ref,
        method=cfg.variant,
        n_steps_planned=n_steps,
        failure=failure,
        failed_step=None if status == OK else int(done),
        wall_time=wall,
    )


@njit((VEC_FN, VEC, MAT, VEC, I64))
def _psi_batch(psi, times, states, p, m):
    out = np.empty((states.shape[0], m))
    for k in range(states.shape[0]):
        out[k] = psi(times[k], states[k], p)
    return out


def stored_defects(traj, sys):
    """``|psi(t_k, x_k) - psi_ref|`` re-evaluated at every stored state."""
    values = _psi_batch(
        sys.conserved_kernel, np.ascontiguousarray(traj.times),
        np.ascontiguousarray(traj.states), sys.params, sys.m,
    )
    return np.abs(values - traj.psi_ref)


def summarize(traj, sys):
    """Reduce a trajectory to the quantities of a results-table row."""
    recomputed = stored_defects(traj, sys).max(axis=0)
    log = traj.diagnostics
    if len(log):
        per_step = np.nanmax(log.psi_defect, axis=0)
        max_defect = np.fmax(recomputed, per_step)
    else:
        max_defect = recomputed
    method = traj.method
    implicit = VARIANTS[method] != RK4
    mean_fpi = float(np.mean(log.iterations)) if implicit and len(log) else None
    max_kappa = None
    if method in MN_VARIANTS and len(log):
        max_kappa = float(np.nanmax(log.kappa))
    nonconv = int(np.count_nonzero(~log.converged)) if implicit else 0
    return ExperimentReport(
        method=method,
        max_psi_defect=max_defect,
        mean_fpi=mean_fpi,
        max_kappa=max_kappa,
        wall_time=traj.wall_time,
        nonconverged_steps=nonconv,
        n_steps=len(log),
        failure=traj.failure,
        failed_step=traj.failed_step,
        names=sys.conserved_names,
    )


@dataclass
class ConvergenceStudy:
    taus: np.ndarray
    errors: np.ndarray
    orders: np.ndarray
    failures: list


def convergence_study(sys, cfg, x0, t0, t_final, halvings=3):
    """Global error at ``t_final`` for ``tau, tau/2, ..., tau/2**halvings``
    against an RK4 reference at ``tau/2**halvings/64``; observed orders are
    ``log2(e(tau) / e(tau/2))``."""
    if halvings < 2:
        raise InvalidParams("halvings must be >= 2")
    taus = cfg.tau / 2.0 ** np.arange(halvings + 1)
    ref_cfg = StepperConfig(tau=taus[-1] / 64.0, variant="rk4")
    ref = integrate(sys, ref_cfg, x0, t0, t_final, decimate=10**9)
    if ref.truncated:
        raise InvalidParams(f"reference solution failed: {ref.failure}")
    x_ref = ref.states[-1]
    errors = np.full(len(taus), np.nan)
    failures = []
    for k, tau in enumerate(taus):
        traj = integrate(sys, replace(cfg, tau=float(tau)), x0, t0, t_final, decimate=10**9)
        failures.append(traj.failure)
        if not traj.truncated:
            errors[k] = float(np.max(np.abs(traj.states[-1] - x_ref)))
    with np.errstate(divide="ignore", invalid="ignore"):
        orders = np.log2(errors[:-1] / errors[1:])
    return ConvergenceStudy(taus, errors, orders, failures)
