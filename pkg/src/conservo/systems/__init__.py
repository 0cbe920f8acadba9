"""Benchmark systems and the experiment registry used by the CLI."""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .lorenz import make_lorenz
from .lotka_volterra import Lv2Params, Lv3Params, make_lv2, make_lv3
from .schwarzschild import (
    PAPER_X0,
    PAPER_Y0,
    SchwarzschildParams,
    christoffel_fd_oracle,
    christoffel_schwarzschild,
    make_schwarzschild,
    metric,
)
from .three_body import (
    ARENSTORF_ALPHA,
    ARENSTORF_PERIOD,
    ARENSTORF_X0,
    make_three_body,
)
from .vortex import VortexParams, make_point_vortex, random_vortex_params

__all__ = [
    "EXPERIMENTS",
    "Experiment",
    "Lv2Params",
    "Lv3Params",
    "SchwarzschildParams",
    "VortexParams",
    "christoffel_fd_oracle",
    "christoffel_schwarzschild",
    "make_lorenz",
    "make_lv2",
    "make_lv3",
    "make_point_vortex",
    "make_schwarzschild",
    "make_three_body",
    "metric",
    "random_vortex_params",
]

VORTEX_COUNT = 100


@dataclass(frozen=True)
class Experiment:
    """Default settings for one benchmark; ``build(seed)`` returns ``(sys, x0)``."""

    name: str
    build: Callable
    tau: float
    t_final: float
    delta: float = 1e-15
    epsilon: float = 1e-15
    max_iters: int = 20
    t0: float = 0.0


def _lv2(seed):
    return make_lv2(Lv2Params(1.0, 2.0, 3.0, 4.0)), np.array([0.3, 0.7])


def _lv3(seed):
    return make_lv3(Lv3Params()), np.array([0.2, 0.5, 0.3])


def _arenstorf(seed):
    return make_three_body(ARENSTORF_ALPHA), np.array(ARENSTORF_X0)


def _lorenz(seed):
    return make_lorenz(), np.array([0.1, 0.0, 0.0])


def vortex_builder(count=VORTEX_COUNT, include_norm_constraints=False):
    def build(seed):
        sys = make_point_vortex(random_vortex_params(count, seed, include_norm_constraints))
        return sys, sys.info["x0"].copy()

    return build


def _schwarzschild(seed):
    return make_schwarzschild(SchwarzschildParams(2.0)), np.array(PAPER_X0 + PAPER_Y0)


_ARENSTORF_T = 1.015 * ARENSTORF_PERIOD

EXPERIMENTS = {
    e.name: e
    for e in (
        Experiment("lv2", _lv2, tau=0.1, t_final=10000.0),
        Experiment("lv3", _lv3, tau=0.05, t_final=30000.0),
        Experiment("arenstorf", _arenstorf, tau=_ARENSTORF_T * 1e-6, t_final=_ARENSTORF_T),
        Experiment("lorenz", _lorenz, tau=0.001, t_final=5.0),
        Experiment("vortex", vortex_builder(), tau=0.1, t_final=200.0),
        Experiment("schwarzschild", _schwarzschild, tau=1.0 / 3.0, t_final=200.0),
    )
}
