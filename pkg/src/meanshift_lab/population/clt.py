"""Limit variances of S_n = n^{-1/2} sum_i x_i after one more update.

For the blurring process, ``S_n^(t+1) => int psi dZ^(t)`` with

    psi(y) = eta(y) + int w(y - s) (y - eta(s)) / rho(s) dF^(t)(s),

eta and rho taken from F^(t).  ``form="textbook"`` drops the ``eta(s)`` part of
the second term (the textbook display keeps only ``y w(y - s) / rho(s)``);
that term is O(1), so the ``"textbook"`` form is kept only for comparison.

For the nonblurring process the update map never changes, so

    S_n^[t+1] => int eta dZ^[t] + int psi_nb dZ^(0),
    psi_nb(y) = int (y - eta(s)) w(y - s) / rho(s) dF^[t](s),

with eta and rho from the base distribution.  Both stochastic integrals are
expanded against the same base bridge, so their covariance is included.
"""

from __future__ import annotations

import numpy as np

from ..core_math.weights import WeightFunction
from ..empirical import EmpiricalCdf, Sample
from ..errors import CostGuard, InvalidParam
from .distribution import BlurringMap, PopulationDistribution, eta_and_derivative, population_chain
from .kernels import T_MAX, KernelGrid

FORMS = ("corrected", "textbook")


def _bridge_variance(phi: np.ndarray, masses: np.ndarray) -> float:
    """Var int phi dB^(0) = int phi^2 - (int phi)^2, clipped at 0 against roundoff."""
    mean = float(phi @ masses)
    return max(float((phi * phi) @ masses) - mean * mean, 0.0)


def _through_level(values, slopes, F_t: PopulationDistribution, S):
    """Coefficients of int g dZ^(t) against dB^(0), given g and g' at the level-t nodes.

    int g dZ^(t) = -int g'(P(x0)) J(x0) Z^(t)(P(x0)) dx0, and at node k
    Z^(t) = B^(0)(u_k) + int R[k, .] dB^(0); ``S`` holds J R.
    """
    if S is None:
        return values
    return values - (F_t.gl_weights * slopes) @ S


def _psi_blurring(F_t: PopulationDistribution, w: WeightFunction, form: str):
    P, m = F_t.nodes, F_t.masses
    eta, deta = eta_and_derivative(P, P, m, w)
    rho = F_t.rho_with(w, P)
    d = P[:, None] - P[None, :]  # y_j - s_k
    wd, dwd = w(d), w.derivative(d)
    if form == "corrected":
        resid = P[:, None] - eta[None, :]
        psi = eta + (wd * resid) @ (m / rho)
        dpsi = deta + (dwd * resid + wd) @ (m / rho)
    else:
        psi = eta + P * (wd @ (m / rho))
        dpsi = deta + (wd + P[:, None] * dwd) @ (m / rho)
    return psi, dpsi


def _check_args(t, F_list, H_list, form):
    if form not in FORMS:
        raise InvalidParam(f"form must be one of {FORMS}")
    if t > T_MAX:
        raise CostGuard(f"variance horizon t={t} exceeds the supported maximum {T_MAX}")
    if t < 0 or t >= len(F_list):
        raise InvalidParam(f"need F^(0..{t}) to compute the level-{t} variance")
    if t > 0 and len(H_list) < t:
        raise InvalidParam(f"need H^(1..{t}) to compute the level-{t} variance")
    return None if t == 0 else H_list[t - 1].scaled_remainder


def clt_variance_blurring(t: int, F_list, H_list, w: WeightFunction, form: str = "corrected") -> float:
    """Asymptotic variance of S_n^(t+1) for the blurring process.

    ``F_list[k]`` is F^(k) and ``H_list[k - 1]`` is H^(k).
    """
    R = _check_args(t, F_list, H_list, form)
    F_t = F_list[t]
    psi, dpsi = _psi_blurring(F_t, w, form)
    phi = _through_level(psi, dpsi, F_t, R)
    return _bridge_variance(phi, F_t.masses)


def clt_variance_nonblurring(t: int, F_list, H_list, w: WeightFunction, form: str = "corrected") -> float:
    """Asymptotic variance of S_n^[t+1] for the nonblurring process."""
    R = _check_args(t, F_list, H_list, form)
    F_t = F_list[t]
    x0, m = F_t.nodes_at(0), F_t.masses
    P = F_t.nodes
    eta_P, deta_P = eta_and_derivative(P, x0, m, w)
    rho_P = F_list[0].rho_with(w, P)
    first = _through_level(eta_P, deta_P, F_t, R)
    wd = w(x0[:, None] - P[None, :])  # y_j - s_k, y over base nodes
    if form == "corrected":
        second = ((x0[:, None] - eta_P[None, :]) * wd) @ (m / rho_P)
    else:
        second = x0 * (wd @ (m / rho_P))
    return _bridge_variance(first + second, m)


def base_variance(F_0: PopulationDistribution) -> float:
    """Var S_n^(0) = Var X."""
    return F_0.variance()


def clt_mean_term(F_t: PopulationDistribution, w: WeightFunction) -> float:
    """int int [w(x - y) x / rho(y) + w(y - x) y / rho(x)] dF dF, zero for symmetric F^(t)."""
    P, m = F_t.nodes, F_t.masses
    rho = F_t.rho_with(w, P)
    W = w(P[:, None] - P[None, :])  # symmetric
    a = (m * P) @ W @ (m / rho)
    return float(2.0 * a)


def clt_variance(dist, w: WeightFunction, t: int, kind: str = "blurring", form: str = "corrected",
                 F_0: PopulationDistribution | None = None) -> float:
    """Asymptotic variance of S_n^(t) (iteration index t >= 0) from a base distribution."""
    from .kernels import kernel_H_blurring, kernel_H_nonblurring

    if t > T_MAX:
        raise CostGuard(f"variance horizon t={t} exceeds the supported maximum {T_MAX}")
    F_0 = F_0 if F_0 is not None else PopulationDistribution.from_base(dist, w=w)
    if t == 0:
        return base_variance(F_0)
    level = t - 1
    if level == 0:
        F_list, H_list = population_chain(F_0, w, 0, kind), []
    else:
        build = kernel_H_blurring if kind == "blurring" else kernel_H_nonblurring
        H_list = build(level, F_0, w)
        F_list = [H_list[0].population.level(0)] + [H.population for H in H_list]
    fn = clt_variance_blurring if kind == "blurring" else clt_variance_nonblurring
    return fn(level, F_list, H_list, w, form)


def lemma3_identity_check(data: Sample | np.ndarray, F_t: PopulationDistribution, w: WeightFunction,
                          x: float, bmap: BlurringMap | None = None) -> float:
    """|LHS - RHS| of the finite-n identity for sqrt(n) (eta_n(x) - eta(x)).

    LHS uses the tabulated population map ``bmap.eta`` (interpolated);
    RHS integrates ``(y - eta_n(x)) w(y - x)`` against ``dZ_n`` with the
    empirical part as a finite sum and the population part by quadrature.
    The two sides agree exactly in exact arithmetic, so the residual measures
    quadrature and interpolation error only.
    """
    values = data.values if isinstance(data, Sample) else np.asarray(data, dtype=float)
    n = values.size
    x = float(x)
    if bmap is None:
        bmap = BlurringMap(F_t.nodes, F_t.masses, w, F_t.t + 1, F_t.positions)
    wx = w(values - x)
    eta_n = float(wx @ values / wx.sum())
    lhs = np.sqrt(n) * (eta_n - float(bmap.eta(x)))
    P, m = F_t.nodes, F_t.masses
    wp = w(P - x)
    rho = float(wp @ m)
    emp = float(((values - eta_n) * wx).sum()) / n
    pop = float(((P - eta_n) * wp) @ m)
    rhs = np.sqrt(n) * (emp - pop) / rho
    return abs(lhs - rhs)


def empirical_z(F_emp: EmpiricalCdf, F_t: PopulationDistribution, x):
    return np.sqrt(F_emp.n) * (np.asarray(F_emp(x)) - np.asarray(F_t.cdf(x)))
