from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate
from scipy import stats

from meanshift_lab import WeightFunction
from meanshift_lab.empirical import RngSeed, SamplingDistribution, draw_sample
from meanshift_lab.errors import CostGuard, InvalidParam
from meanshift_lab.experiments.output import read_table
from meanshift_lab.population import (PopulationDistribution, base_kernel, blurring_map, bridge_covariance,
                                      clt_mean_term, clt_variance, clt_variance_blurring, clt_variance_nonblurring,
                                      default_quadrature, eta_population, kernel_H_blurring, kernel_H_nonblurring,
                                      kernel_K, lemma3_identity_check, population_chain, propagate_distribution)

NORMAL = SamplingDistribution.normal()
W_N = WeightFunction.normal(1.0)
W_L = WeightFunction.double_exponential(1.0)
PAIRS = [(NORMAL, W_N), (NORMAL, W_L), (SamplingDistribution.uniform(-1, 1), W_N),
         (SamplingDistribution.uniform(-1, 1), W_L), (SamplingDistribution.student_t(3), W_N)]
PAIR_IDS = [f"{d.spec()}|{w.spec()}" for d, w in PAIRS]


@pytest.fixture(scope="session")
def chains():
    out = {}
    for (d, w), name in zip(PAIRS, PAIR_IDS):
        out[name] = population_chain(PopulationDistribution.from_base(d, w=w), w, 3)
    return out


@pytest.fixture(scope="session")
def normal_kernels():
    F0 = PopulationDistribution.from_base(NORMAL, w=W_N)
    return kernel_H_blurring(2, F0, W_N), kernel_H_nonblurring(2, F0, W_N)


# ------------------------------------------------------------- base level

@pytest.mark.parametrize("dist,w", PAIRS, ids=PAIR_IDS)
def test_base_moments(dist, w):
    F0 = PopulationDistribution.from_base(dist, w=w)
    assert float(F0.masses.sum()) == pytest.approx(1.0, abs=2e-5)
    assert F0.mean() == pytest.approx(dist.mean, abs=1e-10)
    # the window truncates the tails, so the oracle is the truncated second moment
    lo, hi = F0.quad.edges(F0.center)[[0, -1]]
    m2 = dist.frozen.expect(lambda x: (x - dist.mean) ** 2, lb=lo, ub=hi)
    assert F0.variance() == pytest.approx(m2, rel=1e-8)
    assert F0.tail_mass <= 1e-5 * (1 + 1e-9)


def test_student_t_window_covers_tail_mass():
    q, c = default_quadrature(SamplingDistribution.student_t(3), W_N)
    assert c == 0.0
    assert 2 * stats.t.sf(q.halfwidth, 3) == pytest.approx(1e-5, rel=1e-6)


# ------------------------------------------------------------- blurring map

@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("x", [0.5, 1.0, 2.0])
def test_eta_gaussian_conjugacy(sigma, x):
    w = WeightFunction.normal(sigma)
    F0 = PopulationDistribution.from_base(NORMAL, w=w)
    # posterior mean of a normal prior under a normal likelihood
    assert eta_population(F0, w, x) == pytest.approx(x / (1 + sigma**2), abs=1e-6)


@pytest.mark.parametrize("dist,w", PAIRS, ids=PAIR_IDS)
def test_eta_fixes_centre(dist, w):
    F0 = PopulationDistribution.from_base(dist, w=w)
    assert abs(eta_population(F0, w, dist.mean) - dist.mean) < 1e-10


@pytest.mark.parametrize("w", [W_N, W_L], ids=lambda w: w.spec())
def test_eta_monotone(w):
    F0 = PopulationDistribution.from_base(NORMAL, w=w)
    assert eta_population(F0, w, 0.5) < eta_population(F0, w, 1.0)


@pytest.mark.parametrize("name", PAIR_IDS)
def test_maps_odd_increasing_and_invertible(chains, name):
    chain = chains[name]
    c = chain[0].center
    u = np.linspace(0.05, 0.95, 100)
    for F in chain[:3]:
        bmap = blurring_map(F, F.weight)
        x = F.quantile(u)
        eta = bmap(x)
        assert np.all(np.diff(eta) > 0)
        np.testing.assert_allclose(bmap(2 * c - x) - c, -(eta - c), atol=1e-8)
        np.testing.assert_allclose(bmap.xi(bmap.eta(x)), x, atol=1e-8)
        # in the far tails a Laplace map can be flat to machine precision
        tab = bmap.eta(F.positions)
        assert np.all(np.diff(tab) >= 0)


# ------------------------------------------------------------- propagation

def test_propagated_cdf_matches_closed_form():
    F0 = PopulationDistribution.from_base(NORMAL, w=W_N)
    F1, _ = propagate_distribution(F0, W_N)
    x = np.linspace(-2.5, 2.5, 2001)
    assert np.max(np.abs(F1.cdf(x) - stats.norm.cdf(x, scale=0.5))) < 2e-4


@pytest.mark.parametrize("sigma", [0.5, 2.0])
def test_propagated_quantile_matches_closed_form(sigma):
    w = WeightFunction.normal(sigma)
    F1, _ = propagate_distribution(PopulationDistribution.from_base(NORMAL, w=w), w)
    u = np.linspace(0.01, 0.99, 33)
    np.testing.assert_allclose(F1.quantile(u), stats.norm.ppf(u) / (1 + sigma**2), atol=1e-8)


@pytest.mark.parametrize("name", PAIR_IDS)
def test_cdf_symmetry_all_levels(chains, name):
    chain = chains[name]
    c = chain[0].center
    for F in chain:
        x = np.linspace(0, 3, 61) * np.sqrt(F.variance())
        np.testing.assert_allclose(F.cdf(c - x), 1 - F.cdf(c + x), atol=1e-8)
        assert np.all(np.diff(F.cdf(c + x)) >= 0)


@pytest.mark.parametrize("name", PAIR_IDS)
def test_density_integrates_to_one(chains, name):
    """Three-point Gauss rule per knot interval is exact for the piecewise-quadratic density.

    The window drops ``tail_mass`` of the base law (non-negligible only for t3).
    A Laplace weight on bounded data gives F^(1) an integrable edge singularity,
    which is why a fixed-step rule is not used here.
    """
    F1 = chains[name][1]
    knots = F1.cdf.xs
    g, gw = np.polynomial.legendre.leggauss(3)
    mid, half = 0.5 * (knots[1:] + knots[:-1]), 0.5 * np.diff(knots)
    pts = mid[:, None] + half[:, None] * g[None, :]
    pdf = F1.pdf(pts.ravel()).reshape(pts.shape)
    assert np.all(pdf >= 0)
    assert float(np.sum(half * (pdf @ gw))) == pytest.approx(1.0 - F1.tail_mass, abs=1e-6)


@pytest.mark.parametrize("name", PAIR_IDS)
def test_variance_contracts_and_matches_pushforward(chains, name):
    """Numerical second moment of F^(1) against Monte Carlo through the tabulated map."""
    chain = chains[name]
    F0, F1 = chain[0], chain[1]
    bmap = blurring_map(F0, F0.weight)
    x = F0.base.sample(RngSeed(77).generator(), 400_000)
    x = np.clip(x, *F0.quad.edges(F0.center)[[0, -1]])
    mc = np.var(bmap.eta(x))
    assert F1.variance() < F0.variance()
    assert F1.variance() == pytest.approx(mc, rel=0.03)


@pytest.mark.parametrize("name", PAIR_IDS)
def test_rho_positive_and_symmetric(chains, name):
    for F in chains[name]:
        c = F.center
        y = np.linspace(0, 3, 31)
        r1, r2 = F.rho_with(F.weight, c + y), F.rho_with(F.weight, c - y)
        assert np.all(r1 > 0)
        np.testing.assert_allclose(r1, r2, atol=1e-8)


def test_chain_kind_mismatch():
    F0 = PopulationDistribution.from_base(NORMAL, w=W_N)
    F1, _ = propagate_distribution(F0, W_N, "blurring")
    with pytest.raises(InvalidParam):
        propagate_distribution(F1, W_N, "nonblurring")
    with pytest.raises(InvalidParam):
        propagate_distribution(F1, W_L)


def test_nonblurring_chain_uses_base_map():
    F0 = PopulationDistribution.from_base(NORMAL, w=W_N)
    chain = population_chain(F0, W_N, 2, "nonblurring")
    # eta built from the base normal is x/2 at every step
    np.testing.assert_allclose(chain[2].quantile([0.2, 0.7]), stats.norm.ppf([0.2, 0.7]) / 4, atol=1e-8)


# ------------------------------------------------------------------ kernel K

def _k_oracle(x, y):
    """Closed form for a standard normal base with a unit normal weight."""
    s = 2 * x  # xi(x)
    f1 = stats.norm.pdf(x, scale=0.5)
    rho = sp_integrate.quad(lambda z: stats.norm.pdf(z - s) * stats.norm.pdf(z), -np.inf, np.inf)[0]
    return -f1 * (y - x) * stats.norm.pdf(y - s) / rho + float(y <= s)


@pytest.mark.parametrize("x,y", [(0.5, 0.5), (0.5, 0.3), (-0.4, 1.1), (1.2, 2.0)])
def test_kernel_k_spot_values(x, y):
    F0 = PopulationDistribution.from_base(NORMAL, w=W_N)
    F1, bmap = propagate_distribution(F0, W_N)
    assert kernel_K(F0, F1, bmap, W_N, x, y) == pytest.approx(_k_oracle(x, y), abs=1e-6)


@pytest.mark.parametrize("y", [0.3, 1.0, 2.5])
def test_kernel_k_antisymmetry(y):
    F0 = PopulationDistribution.from_base(NORMAL, w=W_N)
    F1, bmap = propagate_distribution(F0, W_N)
    assert kernel_K(F0, F1, bmap, W_N, 0.0, y) + kernel_K(F0, F1, bmap, W_N, 0.0, -y) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("x", [-1.0, 0.0, 0.8])
def test_kernel_k_tail_is_indicator(x):
    F0 = PopulationDistribution.from_base(NORMAL, w=W_N)
    F1, bmap = propagate_distribution(F0, W_N)
    assert abs(kernel_K(F0, F1, bmap, W_N, x, -9.5) - 1.0) < 1e-6
    assert abs(kernel_K(F0, F1, bmap, W_N, x, 9.5)) < 1e-6


# ------------------------------------------------------------------ kernel H

def test_h1_equals_k_at_quantiles(normal_kernels):
    H1 = normal_kernels[0][0]
    F1 = H1.population
    F0 = F1.level(0)
    bmap = blurring_map(F0, W_N)
    u = np.array([0.1, 0.3, 0.5, 0.8])
    z = np.array([0.05, 0.25, 0.55, 0.9])
    expected = np.array([[kernel_K(F0, F1, bmap, W_N, F1.quantile(a), F0.quantile(b)) for b in z] for a in u])
    np.testing.assert_allclose(H1.table(u, z), expected, atol=1e-6)


def test_base_bridge_covariance():
    H0 = base_kernel(PopulationDistribution.from_base(NORMAL))
    assert bridge_covariance(H0, 0.5, 0.5) == 0.25
    for u, v in [(0.1, 0.7), (0.9, 0.2), (0.33, 0.33)]:
        assert bridge_covariance(H0, u, v) == pytest.approx(min(u, v) - u * v, abs=1e-15)


@given(u=st.floats(0.01, 0.99), v=st.floats(0.01, 0.99))
@settings(max_examples=20, deadline=None)
def test_covariance_symmetric_exactly(normal_kernels, u, v):
    H2 = normal_kernels[0][1]
    assert bridge_covariance(H2, u, v) == bridge_covariance(H2, v, u)


@pytest.mark.parametrize("which", [0, 1])
@pytest.mark.parametrize("t", [1, 2])
def test_covariance_psd(normal_kernels, which, t):
    C = normal_kernels[which][t - 1].covariance_matrix([0.1, 0.3, 0.5, 0.7, 0.9])
    assert np.array_equal(C, C.T)
    assert np.linalg.eigvalsh(C).min() >= -1e-8


def test_covariance_via_h_table(normal_kernels):
    """Bridge covariance agrees with integrating the tabulated H products over a fine z grid."""
    H1 = normal_kernels[0][0]
    z = np.linspace(0, 1, 200_001)[1:-1]
    h = H1.table([0.3, 0.6], z)
    cov = np.trapezoid(h[0] * h[1], z) - np.trapezoid(h[0], z) * np.trapezoid(h[1], z)
    assert bridge_covariance(H1, 0.3, 0.6) == pytest.approx(cov, abs=1e-4)


def test_t1_blurring_nonblurring_covariances_agree(normal_kernels):
    Hb, Hn = normal_kernels[0][0], normal_kernels[1][0]
    for u, v in [(0.25, 0.5), (0.5, 0.5), (0.1, 0.9)]:
        assert bridge_covariance(Hb, u, v) == pytest.approx(bridge_covariance(Hn, u, v), abs=1e-6)


@pytest.mark.parametrize("which", [0, 1])
@pytest.mark.parametrize("t", [1, 2])
def test_bridge_endpoints_vanish(normal_kernels, which, t):
    """Var B(u) shrinks to zero at both ends of (0, 1)."""
    H = normal_kernels[which][t - 1]
    us = [1e-2, 1e-3, 1e-4, 1e-5]
    lo = [bridge_covariance(H, u, u) for u in us]
    hi = [bridge_covariance(H, 1 - u, 1 - u) for u in us]
    for seq in (lo, hi):
        assert all(a > b for a, b in zip(seq, seq[1:]))
        assert seq[-1] < 3e-5
    np.testing.assert_allclose(lo, hi, rtol=1e-4)


def test_refinement_self_convergence():
    q, c = default_quadrature(NORMAL, W_N)
    F0 = PopulationDistribution.from_base(NORMAL, q, c, W_N)
    F0r = PopulationDistribution.from_base(NORMAL, q.refined(), c, W_N)
    u = np.linspace(0.02, 0.98, 25)
    a = kernel_H_blurring(1, F0, W_N)[0].table(u, u)
    b = kernel_H_blurring(1, F0r, W_N)[0].table(u, u)
    assert np.max(np.abs(a - b)) < 1e-4
    for t, kind in [(2, "blurring"), (2, "nonblurring")]:
        v1 = clt_variance(NORMAL, W_N, t, kind, F_0=F0)
        v2 = clt_variance(NORMAL, W_N, t, kind, F_0=F0r)
        assert abs(v1 - v2) < 5e-3 * v2


def test_kernel_horizon_guard():
    F0 = PopulationDistribution.from_base(NORMAL, w=W_N)
    with pytest.raises(CostGuard):
        kernel_H_blurring(4, F0, W_N)
    with pytest.raises(InvalidParam):
        kernel_H_nonblurring(0, F0, W_N)


def test_kernel_csv(tmp_path, normal_kernels):
    H1 = normal_kernels[0][0]
    from meanshift_lab.population import KernelGrid

    small = KernelGrid(1, "blurring", H1.population, H1.scaled_remainder, np.array([0.25, 0.5, 0.75]))
    small.to_csv(tmp_path / "h.csv", {"t": 1})
    meta, cols, rows = read_table(tmp_path / "h.csv")
    assert meta["t"] == "1" and cols == ["u", "z", "H"] and len(rows) == 9
    assert float(rows[4][2]) == small.values[1, 1]


# --------------------------------------------------------------------- CLT

@pytest.mark.parametrize("name", PAIR_IDS)
def test_clt_mean_term_vanishes(chains, name):
    for F in chains[name][:3]:
        if F.center == 0:
            assert abs(clt_mean_term(F, F.weight)) < 1e-8


def test_clt_level_zero_is_variance_of_x():
    assert clt_variance(NORMAL, W_N, 0) == pytest.approx(1.0, abs=1e-10)


def test_clt_t1_closed_form():
    """With a normal base and unit normal weight the first step is x/2 and the
    influence term is available in closed form: Var = E[phi(X)^2], phi(y) = y/2 + rho-weighted residual."""
    # psi(y) = y/2 + E_s[w(y - s)(y - s/2)/rho(s)], s ~ N(0,1), rho = N(0,2) density
    def psi(y):
        f = lambda s: stats.norm.pdf(y - s) * (y - s / 2) / stats.norm.pdf(s, scale=math.sqrt(2)) * stats.norm.pdf(s)
        return y / 2 + sp_integrate.quad(f, -12, 12, epsabs=1e-12)[0]

    var = sp_integrate.quad(lambda y: psi(y) ** 2 * stats.norm.pdf(y), -12, 12, epsabs=1e-10)[0]
    assert clt_variance(NORMAL, W_N, 1) == pytest.approx(var, rel=1e-6)


@pytest.mark.parametrize("form", ["corrected", "textbook"])
def test_clt_t1_processes_agree(form):
    b = clt_variance(NORMAL, W_N, 1, "blurring", form)
    n = clt_variance(NORMAL, W_N, 1, "nonblurring", form)
    assert abs(b - n) < 1e-4 * b


@pytest.mark.parametrize("dist,w", PAIRS, ids=PAIR_IDS)
@pytest.mark.parametrize("kind", ["blurring", "nonblurring"])
def test_clt_variances_finite(dist, w, kind):
    for t in (1, 2):
        v = clt_variance(dist, w, t, kind)
        assert np.isfinite(v) and v >= 0


def test_clt_direct_api(normal_kernels):
    Hb = normal_kernels[0]
    F_list = [Hb[0].population.level(0), Hb[0].population, Hb[1].population]
    assert clt_variance_blurring(1, F_list, Hb, W_N) == pytest.approx(clt_variance(NORMAL, W_N, 2), rel=1e-12)
    Hn = normal_kernels[1]
    F_list_n = [Hn[0].population.level(0), Hn[0].population]
    assert clt_variance_nonblurring(1, F_list_n, Hn, W_N) == pytest.approx(
        clt_variance(NORMAL, W_N, 2, "nonblurring"), rel=1e-12)
    with pytest.raises(InvalidParam):
        clt_variance_blurring(1, F_list, Hb, W_N, form="other")
    with pytest.raises(CostGuard):
        clt_variance(NORMAL, W_N, 4)


# --------------------------------------------------- finite-sample identity

@pytest.mark.parametrize("x", [0.7, 0.0, -1.3, 4.5])
def test_lemma3_identity(x):
    F0 = PopulationDistribution.from_base(NORMAL, w=W_N)
    data = draw_sample(NORMAL, 50, RngSeed(31))
    assert lemma3_identity_check(data, F0, W_N, x) < 1e-8


@pytest.mark.parametrize("n", [20, 200, 2000])
def test_lemma3_residual_independent_of_n(n):
    F0 = PopulationDistribution.from_base(NORMAL, w=W_N)
    data = draw_sample(NORMAL, n, RngSeed(n))
    assert max(lemma3_identity_check(data, F0, W_N, x) for x in (-1.0, 0.3, 2.0)) < 1e-8


def test_lemma3_identity_algebra():
    """Re-derive the right-hand side with scipy quadrature in place of the node sums."""
    data = draw_sample(NORMAL, 40, RngSeed(8)).values
    x, n = 0.7, data.size
    w = lambda d: stats.norm.pdf(d)
    eta_n = np.sum(data * w(data - x)) / np.sum(w(data - x))
    eta = x / 2
    rho = sp_integrate.quad(lambda y: w(y - x) * stats.norm.pdf(y), -12, 12, epsabs=1e-13)[0]
    pop = sp_integrate.quad(lambda y: (y - eta_n) * w(y - x) * stats.norm.pdf(y), -12, 12, epsabs=1e-13)[0]
    rhs = math.sqrt(n) * (np.mean((data - eta_n) * w(data - x)) - pop) / rho
    assert math.sqrt(n) * (eta_n - eta) == pytest.approx(rhs, abs=1e-10)
    F0 = PopulationDistribution.from_base(NORMAL, w=W_N)
    assert lemma3_identity_check(data, F0, W_N, x) < 1e-8


# The tabulated Laplace map is a cubic Hermite interpolant of a node sum that
# has a kink at every node, so the interpolated side carries ~1e-7 error.
@pytest.mark.parametrize("dist,w,tol", [(d, w, 1e-7 if w.family.value == "normal" else 1e-5) for d, w in PAIRS[:4]],
                         ids=PAIR_IDS[:4])
def test_lemma3_other_pairs(dist, w, tol):
    chain = population_chain(PopulationDistribution.from_base(dist, w=w), w, 1)
    data = draw_sample(dist, 100, RngSeed(4)).values
    for F in chain:
        pts = F.push(data)
        x = float(np.median(pts)) + 0.1 * np.sqrt(F.variance())
        assert lemma3_identity_check(pts, F, w, x) < tol
