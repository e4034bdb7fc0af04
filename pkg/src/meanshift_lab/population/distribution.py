"""Population distributions F^(t) carried on Lagrangian quadrature nodes.

Level 0 is a composite Gauss-Legendre rule on the base distribution's
support, with masses ``g_k f(x0_k)``.  Each blurring (or nonblurring) level
moves every node through the population map, ``P^(t)_k = eta(P^(t-1)_k)``,
so ``F^(t)(P^(t)_k) = F(x0_k)`` holds exactly and the density at a node is
``f(x0_k) / J^(t)_k`` with ``J`` the accumulated derivative of the maps.
Panel edges are carried along as extra (massless) points so the CDF grid
spans the whole window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import stats

from ..core_math.interpolation import MonotoneGridFunction
from ..core_math.quadrature import Quadrature
from ..core_math.weights import WeightFamily, WeightFunction
from ..empirical import DistributionFamily, SamplingDistribution
from ..errors import InvalidParam, InversionFailure, NonFiniteIntegrand

TAIL_MASS_TARGET = 1e-5
ROUNDOFF_ULPS = 64
_CHUNK = 512


def default_quadrature(dist: SamplingDistribution, w: WeightFunction | None = None,
                       nodes_per_panel: int = 16) -> tuple[Quadrature, float]:
    """Quadrature window and its centre for a base distribution.

    Normal: 10 sd.  Uniform: the exact support.  Student-t: the two-sided
    tail mass is at most ``TAIL_MASS_TARGET``, with panels no wider than
    the weight scale.
    """
    fam, p = dist.family, dist.params
    if fam is DistributionFamily.NORMAL:
        return Quadrature(64, nodes_per_panel, 10.0 * p[1]), p[0]
    if fam is DistributionFamily.UNIFORM:
        return Quadrature(64, nodes_per_panel, 0.5 * (p[1] - p[0])), 0.5 * (p[0] + p[1])
    L = float(stats.t.isf(0.5 * TAIL_MASS_TARGET, p[0]))
    width = min(L / 32.0, w.standard_deviation() if w is not None else 1.0)
    panels = max(64, 8 * math.ceil(2.0 * L / width / 8.0))
    return Quadrature(panels, nodes_per_panel, L), 0.0


def monotone_grid(xs, ys, slopes=None) -> MonotoneGridFunction:
    """Monotone interpolant through points whose abscissae may tie in floating point.

    Within a run of equal abscissae the last point is kept (largest value,
    matching right-continuity); non-finite slopes are re-estimated from data.
    """
    xs = np.maximum.accumulate(np.asarray(xs, dtype=float))
    keep = np.append(xs[1:] > xs[:-1], True)
    d = None if slopes is None else np.asarray(slopes, dtype=float)[keep]
    return MonotoneGridFunction(xs[keep], np.asarray(ys, dtype=float)[keep], slopes=d)


def _pair_moments(x, src, mass, w: WeightFunction, with_derivative: bool):
    """alpha = sum m S w(S - x), beta = sum m w(S - x), optionally their x-derivatives."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((4 if with_derivative else 2, x.size))
    for lo in range(0, x.size, _CHUNK):
        xs = x[lo:lo + _CHUNK]
        d = src[None, :] - xs[:, None]
        wv = w(d) * mass[None, :]
        out[0, lo:lo + _CHUNK] = wv @ src
        out[1, lo:lo + _CHUNK] = wv.sum(axis=1)
        if with_derivative:
            dv = -w.derivative(d) * mass[None, :]
            out[2, lo:lo + _CHUNK] = dv @ src
            out[3, lo:lo + _CHUNK] = dv.sum(axis=1)
    if not np.all(np.isfinite(out)) or np.any(out[1] <= 0):
        raise NonFiniteIntegrand("weighted moments are not finite or the weight mass vanished")
    return out


def eta_from_sources(x, src, mass, w: WeightFunction):
    a, b = _pair_moments(x, src, mass, w, False)
    return a / b


def eta_and_derivative(x, src, mass, w: WeightFunction):
    a, b, da, db = _pair_moments(x, src, mass, w, True)
    return a / b, (da * b - a * db) / (b * b)


@dataclass(frozen=True, eq=False)
class PopulationDistribution:
    """F^(t) as node positions plus accumulated Jacobians for every level up to t."""

    base: SamplingDistribution
    quad: Quadrature
    center: float
    weight: WeightFunction | None = None
    kind: str = "base"  # "base", "blurring" or "nonblurring"
    levels: tuple = field(default=(), repr=False)  # positions of all grid points per level
    jacobians: tuple = field(default=(), repr=False)

    @classmethod
    def from_base(cls, dist: SamplingDistribution, quad: Quadrature | None = None,
                  center: float | None = None, w: WeightFunction | None = None) -> "PopulationDistribution":
        if quad is None:
            quad, c = default_quadrature(dist, w)
            center = c if center is None else center
        center = dist.mean if center is None else float(center)
        pop = cls(dist, quad, center, w, "base")
        x0 = pop.x0
        object.__setattr__(pop, "levels", (x0,))
        object.__setattr__(pop, "jacobians", (np.ones_like(x0),))
        return pop

    # grid bookkeeping (independent of level)
    @cached_property
    def _layout(self):
        nodes, g = self.quad.nodes_weights(self.center)
        edges = self.quad.edges(self.center)
        x0 = np.concatenate([nodes, edges])
        order = np.argsort(x0, kind="stable")
        x0 = x0[order]
        is_node = order < nodes.size
        weights = np.zeros(x0.size)
        weights[is_node] = g[order[is_node]]
        return x0, np.nonzero(is_node)[0], weights

    @property
    def x0(self) -> np.ndarray:
        return self._layout[0]

    @property
    def node_index(self) -> np.ndarray:
        return self._layout[1]

    @cached_property
    def gl_weights(self) -> np.ndarray:
        """Base-space quadrature weights at the nodes."""
        return self._layout[2][self.node_index]

    @cached_property
    def base_pdf(self) -> np.ndarray:
        return np.asarray(self.base.pdf(self.x0), dtype=float)

    @cached_property
    def u(self) -> np.ndarray:
        """F(x0) for every grid point; equals F^(t) at the level-t position."""
        return np.asarray(self.base.cdf(self.x0), dtype=float)

    @cached_property
    def masses(self) -> np.ndarray:
        return self.gl_weights * self.base_pdf[self.node_index]

    @property
    def t(self) -> int:
        return len(self.levels) - 1

    @property
    def positions(self) -> np.ndarray:
        return self.levels[-1]

    @property
    def nodes(self) -> np.ndarray:
        return self.positions[self.node_index]

    @property
    def node_jacobian(self) -> np.ndarray:
        return self.jacobians[-1][self.node_index]

    @property
    def node_u(self) -> np.ndarray:
        return self.u[self.node_index]

    @cached_property
    def density_grid(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return self.base_pdf / self.jacobians[-1]

    @cached_property
    def cdf(self) -> MonotoneGridFunction:
        return monotone_grid(self.positions, self.u, self.density_grid)

    @property
    def support_halfwidth(self) -> float:
        return float(np.max(np.abs(self.positions - self.center)))

    @cached_property
    def tail_mass(self) -> float:
        return float(self.u[0] + (1.0 - self.u[-1]))

    def level(self, t: int) -> "PopulationDistribution":
        """This chain truncated at level ``t``."""
        if not 0 <= t <= self.t:
            raise InvalidParam(f"level {t} not available (have 0..{self.t})")
        if t == self.t:
            return self
        pop = PopulationDistribution(self.base, self.quad, self.center, self.weight,
                                     self.kind if t > 0 else "base",
                                     self.levels[:t + 1], self.jacobians[:t + 1])
        return pop

    def nodes_at(self, t: int) -> np.ndarray:
        return self.levels[t][self.node_index]

    def jacobian_at(self, t: int) -> np.ndarray:
        return self.jacobians[t][self.node_index]

    def sources(self) -> tuple[np.ndarray, np.ndarray]:
        """Node positions defining the next map: own level (blurring) or level 0 (nonblurring)."""
        if self.kind == "nonblurring":
            return self.nodes_at(0), self.masses
        return self.nodes, self.masses

    def cdf_eval(self, x):
        return self.cdf(x)

    def pdf(self, x):
        return self.cdf.derivative(x)

    def quantile(self, u):
        """F^(t)^-1(u): the base quantile pushed through every stored map."""
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0) | (u >= 1)):
            raise InvalidParam("quantile levels must lie in (0, 1)")
        return self.push(self.base.ppf(u))

    def push(self, x0):
        """Map base-space points to level t."""
        x = np.asarray(x0, dtype=float)
        shape = x.shape
        x = np.atleast_1d(x).ravel()
        for lev in range(self.t):
            src = self.nodes_at(0 if self.kind == "nonblurring" else lev)
            x = eta_from_sources(x, src, self.masses, self.weight)
        x = x.reshape(shape)
        return float(x) if x.ndim == 0 else x

    def push_with_jacobian(self, x0):
        """(P^(t)(x0), dP^(t)/dx0) for base-space points."""
        x = np.atleast_1d(np.asarray(x0, dtype=float)).ravel().copy()
        jac = np.ones_like(x)
        for lev in range(self.t):
            src = self.nodes_at(0 if self.kind == "nonblurring" else lev)
            x, d = eta_and_derivative(x, src, self.masses, self.weight)
            jac = jac * d
        return x, jac

    def rho(self, s):
        """E w(X - s) under F^(t)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        w = self.weight if self.weight is not None else None
        if w is None:
            raise InvalidParam("rho needs a weight function")
        return _pair_moments(s, self.nodes, self.masses, w, False)[1]

    def rho_with(self, w: WeightFunction, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return _pair_moments(s, self.nodes, self.masses, w, False)[1]

    def expect(self, f) -> float:
        """Integral of ``f`` against dF^(t)."""
        vals = np.asarray(f(self.nodes), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise NonFiniteIntegrand("integrand is not finite at every node")
        return float(vals @ self.masses)

    def mean(self) -> float:
        return self.expect(lambda x: x)

    def variance(self) -> float:
        m = self.mean()
        return self.expect(lambda x: (x - m) ** 2)


@dataclass(frozen=True, eq=False)
class BlurringMap:
    """eta^(t+1) built from a source configuration, plus its inverse xi^(t+1)."""

    sources: np.ndarray = field(repr=False)
    masses: np.ndarray = field(repr=False)
    weight: WeightFunction
    t: int
    grid: np.ndarray = field(repr=False)

    @cached_property
    def _tab(self):
        vals, slopes = eta_and_derivative(self.grid, self.sources, self.masses, self.weight)
        if self.weight.family is WeightFamily.DOUBLE_EXPONENTIAL:
            # With a Laplace weight, eta of a discrete source set is constant
            # beyond the outermost sources; the continuum map is not, so grid
            # points there are extended linearly from the hull endpoints.
            lo, hi = self.sources[0], self.sources[-1]
            for mask, edge in ((self.grid < lo, lo), (self.grid > hi, hi)):
                if np.any(mask):
                    v, d = eta_and_derivative(np.array([edge]), self.sources, self.masses, self.weight)
                    vals[mask] = v[0] + d[0] * (self.grid[mask] - edge)
                    slopes[mask] = d[0]
        drop = np.diff(vals)
        tol = ROUNDOFF_ULPS * np.finfo(float).eps * max(1.0, float(np.max(np.abs(vals))))
        if np.any(drop < -tol):
            bad = int(np.argmin(drop))
            raise InversionFailure(
                f"eta^({self.t}) decreases near x={float(self.grid[bad])!r}; "
                "the quadrature grid is too coarse for this weight scale")
        # Ties and single-ulp reversals are floating-point resolution limits
        # where the map squeezes negligible mass together; keep them ordered.
        return np.maximum.accumulate(vals), slopes

    @cached_property
    def eta(self) -> MonotoneGridFunction:
        vals, slopes = self._tab
        return monotone_grid(self.grid, vals, slopes)

    def __call__(self, x):
        """Direct quadrature evaluation (not interpolated)."""
        out = eta_from_sources(x, self.sources, self.masses, self.weight)
        return float(out[0]) if np.ndim(x) == 0 else out

    def derivative(self, x):
        out = eta_and_derivative(x, self.sources, self.masses, self.weight)[1]
        return float(out[0]) if np.ndim(x) == 0 else out

    def xi(self, y):
        return self.eta.invert(y)


def eta_population(F_t: PopulationDistribution, w: WeightFunction, x):
    """Blurring map built from F^(t): E[Y w(Y - x)] / E[w(Y - x)], Y ~ F^(t)."""
    out = eta_from_sources(x, F_t.nodes, F_t.masses, w)
    return float(out[0]) if np.ndim(x) == 0 else out


def eta_derivative(F_t: PopulationDistribution, w: WeightFunction, x):
    out = eta_and_derivative(x, F_t.nodes, F_t.masses, w)[1]
    return float(out[0]) if np.ndim(x) == 0 else out


def blurring_map(F_t: PopulationDistribution, w: WeightFunction, kind: str = "blurring") -> BlurringMap:
    src = F_t.nodes_at(0) if kind == "nonblurring" else F_t.nodes
    return BlurringMap(src, F_t.masses, w, F_t.t + 1, F_t.positions)


def propagate_distribution(F_t: PopulationDistribution, w: WeightFunction,
                           kind: str = "blurring") -> tuple[PopulationDistribution, BlurringMap]:
    """F^(t+1) = F^(t) o xi^(t+1), returned with the map that produced it.

    ``kind="nonblurring"`` keeps the map built from the level-0 distribution.
    """
    if kind not in ("blurring", "nonblurring"):
        raise InvalidParam(f"unknown propagation kind {kind!r}")
    if F_t.kind not in ("base", kind):
        raise InvalidParam(f"cannot extend a {F_t.kind} chain with a {kind} step")
    if F_t.weight is not None and F_t.weight != w:
        raise InvalidParam("weight function differs from the one used for earlier levels")
    m = blurring_map(F_t, w, kind)
    vals, slopes = m._tab  # raises InversionFailure on a non-monotone map
    new = PopulationDistribution(F_t.base, F_t.quad, F_t.center, w, kind,
                                 F_t.levels + (vals,), F_t.jacobians + (F_t.jacobians[-1] * slopes,))
    return new, m


def population_chain(F_0: PopulationDistribution, w: WeightFunction, t_max: int,
                     kind: str = "blurring") -> list[PopulationDistribution]:
    """[F^(0), F^(1), ..., F^(t_max)]."""
    chain = [F_0 if F_0.weight is not None else _with_weight(F_0, w)]
    for _ in range(t_max):
        chain.append(propagate_distribution(chain[-1], w, kind)[0])
    return chain


def _with_weight(F: PopulationDistribution, w: WeightFunction) -> PopulationDistribution:
    return PopulationDistribution(F.base, F.quad, F.center, w, F.kind, F.levels, F.jacobians)
