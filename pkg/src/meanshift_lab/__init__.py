"""Blurring and nonblurring mean-shift processes for robust location estimation."""

from __future__ import annotations

__version__ = "0.1.0"

from .core_math import MonotoneGridFunction, Quadrature, WeightFunction, integrate, invert_monotone, weight_eval
from .empirical import EmpiricalCdf, RngSeed, Sample, SamplingDistribution, draw_sample, median
from .process import (
    ConvergenceConfig,
    ProcessKind,
    ProcessState,
    RunResult,
    blurring_step,
    fixed_point_step,
    nonblurring_step,
    run_to_convergence,
)

__all__ = [
    "ConvergenceConfig",
    "EmpiricalCdf",
    "MonotoneGridFunction",
    "ProcessKind",
    "ProcessState",
    "Quadrature",
    "RngSeed",
    "RunResult",
    "Sample",
    "SamplingDistribution",
    "WeightFunction",
    "__version__",
    "blurring_step",
    "draw_sample",
    "fixed_point_step",
    "integrate",
    "invert_monotone",
    "median",
    "nonblurring_step",
    "run_to_convergence",
    "weight_eval",
]
