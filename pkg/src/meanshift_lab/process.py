"""Finite-sample mean-shift engines: nonblurring, blurring and the fixed-point M-estimator."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .core_math.weights import WeightFunction
from .empirical import Sample
from .errors import DegenerateWeights, InvalidParam


class ProcessKind(str, Enum):
    BLURRING = "blurring"
    NONBLURRING = "nonblurring"
    FIXED_POINT = "fixed-point"

    @classmethod
    def parse(cls, name: str) -> "ProcessKind":
        key = name.strip().lower().replace("_", "-")
        aliases = {"blur": "blurring", "nonblur": "nonblurring", "fixed": "fixed-point",
                   "fixedpoint": "fixed-point"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise InvalidParam(f"unknown process kind {name!r}") from None


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float).ravel()
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ProcessState:
    points: np.ndarray
    t: int = 0
    original_points: np.ndarray | None = None

    def __post_init__(self):
        pts = _frozen(self.points)
        orig = pts if self.original_points is None else _frozen(self.original_points)
        if pts.size < 1:
            raise InvalidParam("a process state needs at least one point")
        if orig.shape != pts.shape:
            raise InvalidParam("points and original_points must have equal length")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(orig))):
            raise InvalidParam("process state entries must be finite")
        if self.t < 0:
            raise InvalidParam("iteration counter must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "original_points", orig)

    @classmethod
    def initial(cls, data: Sample | np.ndarray) -> "ProcessState":
        values = data.values if isinstance(data, Sample) else data
        return cls(values, 0, values)

    @property
    def n(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class ConvergenceConfig:
    """Stop once the largest absolute displacement is at most ``tol``."""

    tol: float = 1e-8
    max_iter: int = 1000
    criterion: str = "max-abs-displacement"

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidParam("tol must be positive")
        if int(self.max_iter) < 1:
            raise InvalidParam("max_iter must be at least 1")
        if self.criterion != "max-abs-displacement":
            raise InvalidParam(f"unsupported convergence criterion {self.criterion!r}")
        object.__setattr__(self, "max_iter", int(self.max_iter))


@dataclass(frozen=True)
class RunResult:
    final_state: ProcessState | None  # None for the fixed-point estimator
    iterations_used: int
    converged: bool
    estimate: float
    kind: ProcessKind
    mean_estimate: float
    last_displacement: float
    spread: float
    order_preserved: bool = True
    order_violations: int = 0
    history: tuple[float, ...] = field(default=(), repr=False)


def _checked(new: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(new)):
        raise DegenerateWeights("weight denominator underflowed; weight scale is too small for the data spread")
    return new


def nonblurring_step(state: ProcessState, w: WeightFunction) -> ProcessState:
    new = _kernels.nonblurring_update(
        np.ascontiguousarray(state.points), np.ascontiguousarray(state.original_points), w.code, w.scale)
    return ProcessState(_checked(new), state.t + 1, state.original_points)


def blurring_step(state: ProcessState, w: WeightFunction) -> ProcessState:
    """Simultaneous update: every new point is computed from the same snapshot."""
    new = _kernels.blurring_update(np.ascontiguousarray(state.points), w.code, w.scale)
    return ProcessState(_checked(new), state.t + 1, state.original_points)


def fixed_point_step(mu: float, data: Sample | np.ndarray, w: WeightFunction) -> float:
    values = data.values if isinstance(data, Sample) else np.asarray(data, dtype=float)
    if values.size < 1:
        raise InvalidParam("data must be nonempty")
    num, den = _kernels.weighted_mean(float(mu), np.ascontiguousarray(values), w.code, w.scale)
    if not (den > 0 and np.isfinite(num)):
        raise DegenerateWeights(f"all weights underflowed at mu={mu!r}")
    return num / den


def order_violations(before: np.ndarray, after: np.ndarray, rtol: float = 4 * np.finfo(float).eps) -> int:
    """Count adjacent inversions of ``after`` along the stable sort of ``before``.

    Inversions smaller than a few ulps of the configuration's magnitude are
    roundoff between (nearly) coincident points and are not counted.
    """
    order = np.argsort(before, kind="stable")
    seq = np.asarray(after)[order]
    scale = max(1.0, float(np.max(np.abs(seq))))
    return int(np.count_nonzero(np.diff(seq) < -rtol * scale))


def run_to_convergence(
    initial: Sample | np.ndarray,
    w: WeightFunction,
    kind: ProcessKind | str,
    cfg: ConvergenceConfig | None = None,
    start: float | None = None,
    check_order: bool = True,
    keep_history: bool = False,
) -> RunResult:
    """Iterate one process until the max displacement drops to ``cfg.tol``.

    The estimate is the median of the final configuration; for the
    fixed-point estimator it is the final ``mu`` (default start: sample median).
    """
    cfg = cfg or ConvergenceConfig()
    kind = ProcessKind.parse(kind) if isinstance(kind, str) else ProcessKind(kind)
    values = initial.values if isinstance(initial, Sample) else np.asarray(initial, dtype=float)
    if values.size < 1:
        raise InvalidParam("initial sample must be nonempty")

    if kind is ProcessKind.FIXED_POINT:
        mu = float(np.median(values)) if start is None else float(start)
        hist = []
        converged, disp, it = False, np.inf, 0
        for it in range(1, cfg.max_iter + 1):
            new = fixed_point_step(mu, values, w)
            disp = abs(new - mu)
            mu = new
            if keep_history:
                hist.append(mu)
            if disp <= cfg.tol:
                converged = True
                break
        return RunResult(None, it, converged, mu, kind, mu, disp, 0.0, history=tuple(hist))

    step = blurring_step if kind is ProcessKind.BLURRING else nonblurring_step
    state = ProcessState.initial(values)
    violations = 0
    hist = []
    converged, disp = False, np.inf
    while state.t < cfg.max_iter:
        new = step(state, w)
        if check_order:
            violations += order_violations(state.points, new.points)
        disp = float(np.max(np.abs(new.points - state.points)))
        state = new
        if keep_history:
            hist.append(disp)
        if disp <= cfg.tol:
            converged = True
            break
    pts = state.points
    return RunResult(
        final_state=state,
        iterations_used=state.t,
        converged=converged,
        estimate=float(np.median(pts)),
        kind=kind,
        mean_estimate=float(np.mean(pts)),
        last_displacement=disp,
        spread=float(pts.max() - pts.min()),
        order_preserved=violations == 0,
        order_violations=violations,
        history=tuple(hist),
    )
