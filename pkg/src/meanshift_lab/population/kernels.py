"""Transfer kernels K, limit kernels H and the bridge covariance.

The limit of ``Z_n^(t)`` evaluated at its own quantiles is written as

    B^(t)(u) = int [1{z <= u} + R^(t)(u, z)] dB^(0)(z),

with ``B^(0)`` a standard Brownian bridge, i.e. ``H^(t) = 1{z <= u} + R^(t)``.
The indicator is kept analytically.  What is tabulated is the scaled
remainder ``J^(t)(x0_i) R^(t)(u_i, z_j)`` on the quadrature nodes (u at the
level-t nodes, z at the base nodes), where ``J^(t)`` is the derivative of
the level-t position with respect to the base point.  The scaling keeps the
table finite where the maps squeeze tail mass together (``J`` underflows
there while the density ``f(x0) / J`` explodes).  One step of the recursion
linearises ``F_n^(t+1) = F_n^(t) o xi_n^(t+1)``:

    Z^(t+1)(x) = Z^(t)(s) - c(x) int (y - x) w(y - s) dZ^(t)(y),
    s = xi(x),  c(x) = f^(t+1)(x) / rho^(t)(s).

The stochastic integral is integrated by parts onto ``Z^(t)`` values at the
nodes, so no derivative of a tabulated H is ever needed.  For the
nonblurring process the integral runs against ``Z^(0)`` and ``rho`` is that
of the base distribution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..core_math.weights import WeightFunction
from ..errors import CostGuard, InvalidParam
from .distribution import BlurringMap, PopulationDistribution, population_chain

T_MAX = 3


def default_u_grid(size: int = 401, edge: float = 1e-3) -> np.ndarray:
    return np.linspace(edge, 1.0 - edge, size)


def kernel_K(F_t: PopulationDistribution, F_t1: PopulationDistribution, bmap: BlurringMap,
             w: WeightFunction, x, y):
    """One-step transfer kernel K^(t+1)(x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.asarray(bmap.xi(x), dtype=float)
    rho = F_t.rho_with(w, np.atleast_1d(s)).reshape(s.shape)
    f1 = np.asarray(F_t1.pdf(x), dtype=float)
    out = -f1 * (y - x) * w(y - s) / rho + (y <= s)
    return float(out) if np.ndim(out) == 0 else out


def _step_coefficients(F_next: PopulationDistribution, rho_source: PopulationDistribution,
                       w: WeightFunction):
    """x_i, s_i, f(x0_i) / rho(s_i) and eta'(s_i) at the nodes."""
    t = F_next.t
    x = F_next.nodes_at(t)
    s = F_next.nodes_at(t - 1)
    f0 = F_next.base_pdf[F_next.node_index]
    rho = rho_source.rho_with(w, s)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = F_next.jacobian_at(t) / F_next.jacobian_at(t - 1)
    # eta'(s_i); where both Jacobians underflowed the row is pure tail noise.
    slope = np.where(np.isfinite(ratio), ratio, 0.0)
    return x, s, f0 / rho, slope


def _blurring_remainder(S, F_next: PopulationDistribution, w: WeightFunction):
    """Scaled remainder J^(t+1) R^(t+1) from J^(t) R^(t)."""
    t = F_next.t
    F_prev = F_next.level(t - 1)
    x, s, c, slope = _step_coefficients(F_next, F_prev, w)
    P = F_prev.nodes
    d = P[None, :] - s[:, None]
    wd = w(d)
    A = (P[None, :] - x[:, None]) * wd
    new = -c[:, None] * A
    if S is not None:
        dA = wd + (P[None, :] - x[:, None]) * w.derivative(d)
        new += slope[:, None] * S + (c[:, None] * dA * F_prev.gl_weights[None, :]) @ S
    return new


def _nonblurring_remainder(S, F_next: PopulationDistribution, w: WeightFunction):
    x, s, c, slope = _step_coefficients(F_next, F_next.level(0), w)
    x0 = F_next.nodes_at(0)
    A = (x0[None, :] - x[:, None]) * w(x0[None, :] - s[:, None])
    new = -c[:, None] * A
    return new if S is None else slope[:, None] * S + new


@dataclass(frozen=True, eq=False)
class KernelGrid:
    """H^(t) (or H^[t]) for one level.

    ``scaled_remainder`` holds ``J^(t)(x0_i) R^(t)(u_i, z_j)`` on the nodes and
    is None for the base bridge (t = 0).  ``values`` tabulates H on
    ``u_grid x v_grid``.
    """

    t: int
    process_kind: str
    population: PopulationDistribution = field(repr=False)
    scaled_remainder: np.ndarray | None = field(default=None, repr=False)
    u_grid: np.ndarray = field(default_factory=default_u_grid, repr=False)
    v_grid: np.ndarray | None = field(default=None, repr=False)

    @property
    def z_nodes(self) -> np.ndarray:
        return self.population.node_u

    def _interp(self, u):
        """Lagrange rows mapping node values (in base space) to arbitrary levels u."""
        pop = self.population
        x0 = np.asarray(pop.base.ppf(np.atleast_1d(np.asarray(u, dtype=float))), dtype=float)
        edges = pop.quad.edges(pop.center)
        x0 = np.clip(x0, edges[0], edges[-1])
        return pop.quad.interpolation_matrix(x0, pop.center), x0

    def remainder_rows(self, u) -> np.ndarray:
        """R^(t)(u, z_j) at the base nodes z_j for each requested u."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if self.scaled_remainder is None:
            return np.zeros((u.size, self.z_nodes.size))
        M, x0 = self._interp(u)
        _, jac = self.population.push_with_jacobian(x0)
        return (M @ self.scaled_remainder) / jac[:, None]

    def table(self, u, z) -> np.ndarray:
        """H^(t)(u_a, z_b) on the tensor grid ``u x z``."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        out = (z[None, :] <= u[:, None]).astype(float)
        if self.scaled_remainder is not None:
            Mz, _ = self._interp(z)
            out += self.remainder_rows(u) @ Mz.T
        return out

    @cached_property
    def values(self) -> np.ndarray:
        v = self.u_grid if self.v_grid is None else self.v_grid
        return self.table(self.u_grid, v)

    def covariance(self, u, v) -> float:
        return bridge_covariance(self, u, v)

    def covariance_matrix(self, us) -> np.ndarray:
        us = np.asarray(us, dtype=float)
        return np.array([[bridge_covariance(self, a, b) for b in us] for a in us])

    def to_csv(self, path, metadata: dict | None = None) -> None:
        v = self.u_grid if self.v_grid is None else self.v_grid
        vals = self.values
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for k, val in (metadata or {}).items():
                fh.write(f"# {k}: {val}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["u", "z", "H"])
            for a, ua in enumerate(self.u_grid):
                for b, vb in enumerate(v):
                    writer.writerow([repr(float(ua)), repr(float(vb)), repr(float(vals[a, b]))])


def base_kernel(F_0: PopulationDistribution) -> KernelGrid:
    return KernelGrid(0, "bridge", F_0, None)


def _kernel_chain(t_max: int, F_0: PopulationDistribution, w: WeightFunction, kind: str,
                  u_grid=None) -> list[KernelGrid]:
    if t_max > T_MAX:
        raise CostGuard(f"kernel horizon t={t_max} exceeds the supported maximum {T_MAX}")
    if t_max < 1:
        raise InvalidParam("t_max must be at least 1")
    step = _blurring_remainder if kind == "blurring" else _nonblurring_remainder
    chain = population_chain(F_0, w, t_max, kind)
    grid = default_u_grid() if u_grid is None else np.asarray(u_grid, dtype=float)
    out, S = [], None
    for t in range(1, t_max + 1):
        S = step(S, chain[t], w)
        S.setflags(write=False)
        out.append(KernelGrid(t, kind, chain[t], S, grid))
    return out


def kernel_H_blurring(t_max: int, F_0: PopulationDistribution, w: WeightFunction,
                      u_grid=None) -> list[KernelGrid]:
    """[H^(1), ..., H^(t_max)] for the blurring process."""
    return _kernel_chain(t_max, F_0, w, "blurring", u_grid)


def kernel_H_nonblurring(t_max: int, F_0: PopulationDistribution, w: WeightFunction,
                         u_grid=None) -> list[KernelGrid]:
    """[H^[1], ..., H^[t_max]] for the nonblurring process."""
    return _kernel_chain(t_max, F_0, w, "nonblurring", u_grid)


def bridge_covariance(H: KernelGrid, u: float, v: float) -> float:
    """Cov(B(u), B(v)) = int h_u h_v dz - int h_u dz int h_v dz, h_u = H(u, .)."""
    u, v = sorted((float(u), float(v)))  # evaluate in one order so Cov(u, v) == Cov(v, u) exactly
    if not (0.0 < u < 1.0 and 0.0 < v < 1.0):
        raise InvalidParam("u and v must lie in (0, 1)")
    base = min(u, v) - u * v
    if H.scaled_remainder is None:
        return base
    pop = H.population
    m = pop.masses
    f0 = pop.base_pdf[pop.node_index]
    Ru, Rv = H.remainder_rows([u, v])
    _, x0 = H._interp([u, v])
    W = pop.quad.partial_weights(x0, pop.center)  # integrals up to Q(u), Q(v) in base space
    cross_uv = float(W[0] @ (Rv * f0))  # int_{z <= u} R(v, z) dz
    cross_vu = float(W[1] @ (Ru * f0))
    rr = float((Ru * Rv) @ m)
    mean_u = float(Ru @ m)
    mean_v = float(Rv @ m)
    return base + cross_uv + cross_vu + rr - u * mean_v - v * mean_u - mean_u * mean_v
