"""Conservative ODE integration by minimal-norm discrete multipliers."""

from ._jit import JIT_ENABLED
from .errors import (
    ConservoError,
    DomainViolation,
    InvalidParams,
    NoConvergence,
    NonFiniteState,
    SingularMatrix,
)
from .harness import (
    ConvergenceStudy,
    ExperimentReport,
    Trajectory,
    convergence_study,
    integrate,
    summarize,
)
from .linalg import SvdFactors, apply_pinv, cond_2, kernel_basis, solve_sym, svd_thin
from .multiplier import (
    MultiplierMatrix,
    SystemSpec,
    check_chain_rule,
    discrete_time_partial,
    residual,
    telescoping_multiplier,
)
from .steppers import (
    StepDiagnostics,
    StepperConfig,
    base_scheme_f_tau,
    mn_correct,
    mn_correct_m1,
    mn_correct_m2,
    predictor_improved_euler,
    step_implicit_midpoint,
    step_mn,
    step_rk4,
)

__version__ = "0.1.0"
