"""Pairwise mean-shift update kernels.

Two implementations of each kernel exist: numba-compiled loops and plain
numpy broadcasting. ``MEANSHIFT_LAB_BACKEND`` (``numba`` or ``numpy``)
selects which one the public names bind to; numba is used when importable.
Weights are unnormalised (the density constant cancels in every update).

Point updates are computed in displacement form, ``x + sum w (y - x) / sum w``.
The rounding error then scales with the spread of the neighbours rather than
with ``|x|``, so nearly coincident points cannot swap order through roundoff.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

NORMAL, DEXP = 0, 1


def _requested_backend() -> str:
    name = os.environ.get("MEANSHIFT_LAB_BACKEND", "numba").strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"MEANSHIFT_LAB_BACKEND must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and numba is None:
        return "numpy"
    return name


# ---------------------------------------------------------------- numpy path

def _weights_numpy(d, code, scale):
    a = np.abs(d)
    if code == NORMAL:
        return np.exp(-0.5 * (a / scale) ** 2)
    return np.exp(-a / scale)


def blurring_update_numpy(x, code, scale):
    x = np.asarray(x, dtype=float)
    d = x[None, :] - x[:, None]
    w = _weights_numpy(d, code, scale)
    with np.errstate(divide="ignore", invalid="ignore"):
        return x + (w * d).sum(axis=1) / w.sum(axis=1)


def nonblurring_update_numpy(points, data, code, scale):
    points = np.asarray(points, dtype=float)
    data = np.asarray(data, dtype=float)
    d = data[None, :] - points[:, None]
    w = _weights_numpy(d, code, scale)
    with np.errstate(divide="ignore", invalid="ignore"):
        return points + (w * d).sum(axis=1) / w.sum(axis=1)


def weighted_mean_numpy(mu, data, code, scale):
    data = np.asarray(data, dtype=float)
    w = _weights_numpy(data - mu, code, scale)
    return float(w @ data), float(w.sum())


# ---------------------------------------------------------------- numba path
# error_model="numpy" makes an underflowed denominator yield nan/inf (as in the
# numpy path) so the caller can report DegenerateWeights.

if numba is not None:

    @numba.njit(cache=True, nogil=True, inline="always")
    def _w(d, code, scale):
        a = abs(d)
        if code == 0:
            z = a / scale
            return math.exp(-0.5 * z * z)
        return math.exp(-a / scale)

    @numba.njit(cache=True, nogil=True, error_model="numpy")
    def blurring_update_numba(x, code, scale):
        # Symmetric pair loop: w(x_j - x_i) == w(x_i - x_j), one exp per pair.
        n = x.size
        num = np.zeros(n)
        den = np.zeros(n)
        for i in range(n):
            xi = x[i]
            den[i] += 1.0
            for j in range(i + 1, n):
                d = x[j] - xi
                v = _w(d, code, scale)
                num[i] += v * d
                den[i] += v
                num[j] -= v * d
                den[j] += v
        return x + num / den

    @numba.njit(cache=True, nogil=True, error_model="numpy")
    def nonblurring_update_numba(points, data, code, scale):
        m = points.size
        n = data.size
        out = np.empty(m)
        for i in range(m):
            p = points[i]
            a = 0.0
            b = 0.0
            for j in range(n):
                d = data[j] - p
                v = _w(d, code, scale)
                a += v * d
                b += v
            out[i] = p + a / b
        return out

    @numba.njit(cache=True, nogil=True, error_model="numpy")
    def weighted_mean_numba(mu, data, code, scale):
        a = 0.0
        b = 0.0
        for j in range(data.size):
            v = _w(data[j] - mu, code, scale)
            a += v * data[j]
            b += v
        return a, b

else:  # pragma: no cover
    blurring_update_numba = nonblurring_update_numba = weighted_mean_numba = None


BACKEND = _requested_backend()

if BACKEND == "numba":
    blurring_update = blurring_update_numba
    nonblurring_update = nonblurring_update_numba
    weighted_mean = weighted_mean_numba
else:
    blurring_update = blurring_update_numpy
    nonblurring_update = nonblurring_update_numpy
    weighted_mean = weighted_mean_numpy


def available_backends() -> list[str]:
    return ["numba", "numpy"] if numba is not None else ["numpy"]


def kernels_for(backend: str):
    """(blurring_update, nonblurring_update, weighted_mean) for ``backend``."""
    if backend == "numba":
        if numba is None:
            raise ValueError("numba is not installed")
        return blurring_update_numba, nonblurring_update_numba, weighted_mean_numba
    if backend == "numpy":
        return blurring_update_numpy, nonblurring_update_numpy, weighted_mean_numpy
    raise ValueError(f"unknown backend {backend!r}")
