"""Monotone piecewise-cubic grid functions and their inverses."""

from __future__ import annotations

import numpy as np

from ..errors import HardFailure, InvalidParam, OutOfRange

ROOT_TOL = 1e-12
ROOT_MAX_ITER = 200


def _initial_slopes(h, delta):
    """Fritsch-Butland harmonic-mean slopes, shape preserving at the ends."""
    n = delta.size + 1
    d = np.zeros(n)
    if n == 2:
        d[:] = delta[0]
        return d
    w1 = 2 * h[1:] + h[:-1]
    w2 = h[1:] + 2 * h[:-1]
    same = (delta[:-1] * delta[1:]) > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        hm = (w1 + w2) / (w1 / delta[:-1] + w2 / delta[1:])
    d[1:-1] = np.where(same, hm, 0.0)
    for end, (h0, h1, d0, d1) in ((0, (h[0], h[1], delta[0], delta[1])),
                                  (-1, (h[-1], h[-2], delta[-1], delta[-2]))):
        s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
        if np.sign(s) != np.sign(d0):
            s = 0.0
        elif np.sign(d0) != np.sign(d1) and abs(s) > abs(3 * d0):
            s = 3 * d0
        d[end] = s
    return d


def _limit_slopes(d, delta):
    """Fritsch-Carlson limiter: keeps each cubic piece monotone."""
    d = np.maximum(d, 0.0)
    flat = delta == 0
    d[:-1][flat] = 0.0
    d[1:][flat] = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(flat, 0.0, d[:-1] / delta)
        b = np.where(flat, 0.0, d[1:] / delta)
    r2 = a * a + b * b
    over = r2 > 9.0
    if np.any(over):
        tau = 3.0 / np.sqrt(r2[over])
        idx = np.nonzero(over)[0]
        # Sequential so a shared node keeps the smaller of its two limits.
        for k, t in zip(idx, tau):
            d[k] = min(d[k], t * a[k] * delta[k])
            d[k + 1] = min(d[k + 1], t * b[k] * delta[k])
    return d


class MonotoneGridFunction:
    """Monotone cubic Hermite interpolant through ``(xs, ys)``.

    ``slopes`` may carry exact nodal derivatives (NaN where unknown); they
    are passed through the Fritsch-Carlson limiter so monotonicity is
    guaranteed either way.
    """

    def __init__(self, xs, ys, slopes=None, extrapolate: str = "clamp"):
        xs = np.array(xs, dtype=float)
        ys = np.array(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise InvalidParam("xs and ys must be 1-d arrays of equal length >= 2")
        if not np.all(np.diff(xs) > 0):
            raise InvalidParam("grid xs must be strictly increasing")
        if not np.all(np.diff(ys) >= 0):
            raise InvalidParam("grid ys must be nondecreasing")
        if extrapolate not in ("clamp", "linear", "raise"):
            raise InvalidParam(f"unknown extrapolation mode {extrapolate!r}")
        h = np.diff(xs)
        delta = np.diff(ys) / h
        d = _initial_slopes(h, delta)
        if slopes is not None:
            given = np.array(slopes, dtype=float)
            if given.shape != xs.shape:
                raise InvalidParam("slopes must match the grid length")
            d = np.where(np.isfinite(given), given, d)
        d = _limit_slopes(d, delta)
        for arr in (xs, ys, d):
            arr.setflags(write=False)
        self.xs, self.ys, self.slopes = xs, ys, d
        self.extrapolate = extrapolate

    def __len__(self):
        return self.xs.size

    @property
    def domain(self):
        return float(self.xs[0]), float(self.xs[-1])

    @property
    def range(self):
        return float(self.ys[0]), float(self.ys[-1])

    def _segments(self, x):
        k = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, self.xs.size - 2)
        h = self.xs[k + 1] - self.xs[k]
        return k, h, (x - self.xs[k]) / h

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        k, h, s = self._segments(x)
        s2, s3 = s * s, s * s * s
        y0, y1 = self.ys[k], self.ys[k + 1]
        d0, d1 = self.slopes[k], self.slopes[k + 1]
        out = ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0
               + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1)
        # Exact reproduction of stored values at the nodes.
        at_node = s == 0.0
        out[at_node] = y0[at_node]
        out = self._outside(x, out, values=True)
        return float(out[0]) if scalar else out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        k, h, s = self._segments(x)
        y0, y1 = self.ys[k], self.ys[k + 1]
        d0, d1 = self.slopes[k], self.slopes[k + 1]
        out = ((6 * s * s - 6 * s) * (y0 - y1) / h + (3 * s * s - 4 * s + 1) * d0
               + (3 * s * s - 2 * s) * d1)
        out = self._outside(x, out, values=False)
        return float(out[0]) if scalar else out

    def _outside(self, x, out, values):
        lo, hi = x < self.xs[0], x > self.xs[-1]
        if not (np.any(lo) or np.any(hi)):
            return out
        if self.extrapolate == "raise":
            raise OutOfRange("evaluation point outside the tabulated grid")
        if self.extrapolate == "clamp":
            out[lo] = self.ys[0] if values else 0.0
            out[hi] = self.ys[-1] if values else 0.0
        elif values:
            out[lo] = self.ys[0] + self.slopes[0] * (x[lo] - self.xs[0])
            out[hi] = self.ys[-1] + self.slopes[-1] * (x[hi] - self.xs[-1])
        else:
            out[lo] = self.slopes[0]
            out[hi] = self.slopes[-1]
        return out

    def invert(self, y):
        """Vectorised :func:`invert_monotone`."""
        y = np.asarray(y, dtype=float)
        out = np.array([invert_monotone(self, v) for v in np.atleast_1d(y).ravel()])
        return float(out[0]) if y.ndim == 0 else out.reshape(y.shape)


def invert_monotone(g: MonotoneGridFunction, y: float) -> float:
    """Solve ``g(x) = y`` by bracketing bisection with Newton refinement."""
    y = float(y)
    y_lo, y_hi = g.range
    slack = 1e-14 * max(1.0, abs(y_lo), abs(y_hi))
    if not (y_lo - slack <= y <= y_hi + slack):
        raise OutOfRange(f"value {y!r} outside grid range [{y_lo!r}, {y_hi!r}]")
    xs, ys = g.xs, g.ys
    k = int(np.clip(np.searchsorted(ys, y, side="right") - 1, 0, xs.size - 2))
    if ys[k] == y:
        return float(xs[k])
    if ys[k + 1] == y:
        return float(xs[k + 1])
    lo, hi = float(xs[k]), float(xs[k + 1])
    span = ys[k + 1] - ys[k]
    x = lo + (hi - lo) * ((y - ys[k]) / span if span > 0 else 0.5)
    for _ in range(ROOT_MAX_ITER):
        r = g(x) - y
        if r == 0.0:
            return x
        if r > 0:
            hi = x
        else:
            lo = x
        dr = g.derivative(x)
        step = r / dr if dr > 0 else np.inf
        cand = x - step
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        if abs(cand - x) <= ROOT_TOL * 1e-2 or hi - lo <= ROOT_TOL:
            return cand
        x = cand
    raise HardFailure(f"inversion did not converge in {ROOT_MAX_ITER} iterations")
