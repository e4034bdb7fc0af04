"""Composite Gauss-Legendre quadrature on a truncated symmetric window."""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from ..errors import InvalidParam, NonFiniteIntegrand, OutOfRange


@lru_cache(maxsize=None)
def _reference_rule(q: int):
    xi, om = np.polynomial.legendre.leggauss(q)
    # Orthogonality gives V^{-1} = diag((2m+1)/2) V^T diag(om) without a solve.
    vander = _legendre_table(xi, q - 1)  # (q nodes, q degrees)
    coef = (vander * om[:, None]) * ((2 * np.arange(q) + 1) / 2.0)[None, :]
    for arr in (xi, om, coef):
        arr.setflags(write=False)
    return xi, om, coef


def _legendre_table(s, degree):
    """P_0..P_degree evaluated at ``s``; shape (len(s), degree + 1)."""
    s = np.asarray(s, dtype=float)
    out = np.empty((s.size, degree + 1))
    out[:, 0] = 1.0
    if degree >= 1:
        out[:, 1] = s
    for m in range(1, degree):
        out[:, m + 1] = ((2 * m + 1) * s * out[:, m] - m * out[:, m - 1]) / (m + 1)
    return out


@lru_cache(maxsize=64)
def _composite(panels: int, q: int, halfwidth: float, center: float):
    xi, om, _ = _reference_rule(q)
    edges = center - halfwidth + (2.0 * halfwidth / panels) * np.arange(panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    x = (mid[:, None] + half[:, None] * xi[None, :]).ravel()
    w = (half[:, None] * om[None, :]).ravel()
    for arr in (edges, x, w):
        arr.setflags(write=False)
    return edges, x, w


@dataclass(frozen=True)
class Quadrature:
    """``panels`` x ``nodes_per_panel`` Gauss-Legendre nodes on ``[c - L, c + L]``."""

    panels: int = 64
    nodes_per_panel: int = 16
    halfwidth: float = 10.0
    rule: str = "gauss-legendre-composite"

    def __post_init__(self):
        if self.panels < 1 or self.nodes_per_panel < 1:
            raise InvalidParam("panels and nodes_per_panel must be positive")
        if not self.halfwidth > 0:
            raise InvalidParam("truncation halfwidth must be positive")
        if self.rule != "gauss-legendre-composite":
            raise InvalidParam(f"unsupported quadrature rule {self.rule!r}")

    @property
    def size(self) -> int:
        return self.panels * self.nodes_per_panel

    def refined(self, factor: int = 2) -> "Quadrature":
        return replace(self, panels=self.panels * factor)

    def nodes_weights(self, center: float = 0.0):
        _, x, w = _composite(self.panels, self.nodes_per_panel, float(self.halfwidth), float(center))
        return x, w

    def edges(self, center: float = 0.0):
        return _composite(self.panels, self.nodes_per_panel, float(self.halfwidth), float(center))[0]

    def integrate(self, f, center: float = 0.0) -> float:
        x, w = self.nodes_weights(center)
        vals = np.asarray(f(x), dtype=float)
        if vals.shape != x.shape:
            vals = np.broadcast_to(vals, x.shape)
        if not np.all(np.isfinite(vals)):
            raise NonFiniteIntegrand("integrand is not finite at every quadrature node")
        return float(vals @ w)

    def _locate(self, points, center):
        edges = self.edges(center)
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        tol = 1e-12 * max(1.0, self.halfwidth)
        if np.any(pts < edges[0] - tol) or np.any(pts > edges[-1] + tol):
            raise OutOfRange("point outside the quadrature window")
        idx = np.clip(np.searchsorted(edges, pts, side="right") - 1, 0, self.panels - 1)
        lo, hi = edges[idx], edges[idx + 1]
        s = np.clip((2.0 * pts - lo - hi) / (hi - lo), -1.0, 1.0)
        return pts, idx, s, 0.5 * (hi - lo)

    def interpolation_matrix(self, points, center: float = 0.0) -> np.ndarray:
        """Rows of panel-local Lagrange weights: ``M @ f(nodes) ~= f(points)``."""
        pts, idx, s, _ = self._locate(points, center)
        q = self.nodes_per_panel
        _, _, coef = _reference_rule(q)
        basis = _legendre_table(s, q - 1) @ coef.T  # (len(pts), q)
        out = np.zeros((pts.size, self.size))
        cols = idx[:, None] * q + np.arange(q)[None, :]
        np.put_along_axis(out, cols, basis, axis=1)
        return out

    def partial_weights(self, upper, center: float = 0.0) -> np.ndarray:
        """Rows of weights with ``W @ f(nodes) ~= integral of f from c - L to upper``."""
        pts, idx, s, half = self._locate(upper, center)
        q = self.nodes_per_panel
        _, om, coef = _reference_rule(q)
        table = _legendre_table(s, q)
        m = np.arange(q)
        antider = np.empty((pts.size, q))
        antider[:, 0] = s + 1.0
        if q > 1:
            antider[:, 1:] = (table[:, 2:q + 1] - table[:, 0:q - 1]) / (2 * m[1:] + 1)
        within = (antider @ coef.T) * half[:, None]
        out = np.zeros((pts.size, self.size))
        _, _, w = _composite(self.panels, q, float(self.halfwidth), float(center))
        for r, p in enumerate(idx):
            out[r, : p * q] = w[: p * q]
            out[r, p * q:(p + 1) * q] = within[r]
        return out


def integrate(q: Quadrature, f, center: float = 0.0) -> float:
    return q.integrate(f, center)
