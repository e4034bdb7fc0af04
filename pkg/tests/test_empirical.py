from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from meanshift_lab.empirical import (EmpiricalCdf, RngSeed, Sample, SamplingDistribution, draw_sample, ecdf_eval,
                                     median, read_sample, write_sample, z_process_eval)
from meanshift_lab.errors import DataParseError, InvalidParam

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def test_normal_sample_mean_near_zero():
    s = draw_sample(SamplingDistribution.normal(), 400, RngSeed(7))
    assert abs(s.values.mean()) < 0.25


def test_uniform_support():
    s = draw_sample(SamplingDistribution.uniform(0, 1), 1000, RngSeed(8))
    assert s.values.min() >= 0 and s.values.max() <= 1


def test_student_t_median():
    n = 100_000
    s = draw_sample(SamplingDistribution.student_t(3), n, RngSeed(9))
    se = 1 / (2 * stats.t.pdf(0, 3) * math.sqrt(n))
    assert 0.02 > 4 * se
    assert abs(median(s)) < 0.02


@pytest.mark.parametrize("dist", [SamplingDistribution.normal(1.5, 2.0), SamplingDistribution.uniform(-1, 1),
                                  SamplingDistribution.student_t(5)], ids=lambda d: d.spec())
def test_sampler_matches_distribution(dist):
    s = draw_sample(dist, 20_000, RngSeed(11))
    assert stats.kstest(s.values, dist.frozen.cdf).pvalue > 1e-4


@pytest.mark.parametrize("make", [lambda: SamplingDistribution.normal(0, 0), lambda: SamplingDistribution.normal(0, -1),
                                  lambda: SamplingDistribution.uniform(1, 1), lambda: SamplingDistribution.uniform(2, 1),
                                  lambda: SamplingDistribution.student_t(0), lambda: SamplingDistribution.student_t(-3)])
def test_invalid_distributions(make):
    with pytest.raises(InvalidParam):
        make()


def test_draw_sample_rejects_empty():
    with pytest.raises(InvalidParam):
        draw_sample(SamplingDistribution.normal(), 0, RngSeed(1))


@pytest.mark.parametrize("spec,expected", [("normal", SamplingDistribution.normal()),
                                           ("normal:1,2", SamplingDistribution.normal(1, 2)),
                                           ("uniform:-1,1", SamplingDistribution.uniform(-1, 1)),
                                           ("t:3", SamplingDistribution.student_t(3))])
def test_distribution_parse(spec, expected):
    d = SamplingDistribution.parse(spec)
    assert d == expected
    assert SamplingDistribution.parse(d.spec()) == d


@pytest.mark.parametrize("spec", ["cauchy", "normal:a,b", "t:0", "uniform:1"])
def test_distribution_parse_rejects(spec):
    with pytest.raises(InvalidParam):
        SamplingDistribution.parse(spec)


@pytest.mark.parametrize("dist,mean", [(SamplingDistribution.uniform(0, 1), 0.5), (SamplingDistribution.normal(3, 1), 3.0),
                                       (SamplingDistribution.student_t(3), 0.0)])
def test_target_mean(dist, mean):
    assert dist.mean == mean


@pytest.mark.parametrize("dist", [SamplingDistribution.normal(), SamplingDistribution.uniform(-1, 1),
                                  SamplingDistribution.student_t(3)], ids=lambda d: d.spec())
def test_density_symmetric_about_mean(dist):
    x = np.linspace(0, 3, 13)
    np.testing.assert_allclose(dist.pdf(dist.mean + x), dist.pdf(dist.mean - x), rtol=1e-14)


@given(seed=st.integers(0, 2**64 - 1), stream=st.integers(0, 2**64 - 1))
@settings(max_examples=30, deadline=None)
def test_rng_reproducible(seed, stream):
    a = draw_sample(SamplingDistribution.student_t(3), 16, RngSeed(seed, stream))
    b = draw_sample(SamplingDistribution.student_t(3), 16, RngSeed(seed, stream))
    assert a.values.tobytes() == b.values.tobytes()


def test_rng_streams_differ():
    a = draw_sample(SamplingDistribution.normal(), 8, RngSeed(1, 0))
    b = draw_sample(SamplingDistribution.normal(), 8, RngSeed(1, 1))
    assert not np.array_equal(a.values, b.values)


@pytest.mark.parametrize("seed,stream", [(-1, 0), (0, -1), (2**64, 0)])
def test_rng_seed_range(seed, stream):
    with pytest.raises(InvalidParam):
        RngSeed(seed, stream)


def test_sample_validation():
    with pytest.raises(InvalidParam):
        Sample(np.array([]))
    with pytest.raises(InvalidParam):
        Sample(np.array([1.0, np.nan]))
    with pytest.raises(InvalidParam):
        Sample(np.array([2.0, 1.0]), sorted_flag=True)


def test_sample_is_read_only():
    s = Sample(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        s.values[0] = 5.0


# ------------------------------------------------------------------- ecdf

@pytest.mark.parametrize("x,expected", [(2.0, 2 / 3), (0.0, 0.0), (3.0, 1.0), (2.5, 2 / 3), (-np.inf, 0.0), (np.inf, 1.0)])
def test_ecdf_examples(x, expected):
    assert ecdf_eval(EmpiricalCdf(np.array([1.0, 2.0, 3.0])), x) == pytest.approx(expected)


@given(values=st.lists(st.integers(-5, 5), min_size=1, max_size=40))
@settings(max_examples=60, deadline=None)
def test_ecdf_properties(values):
    v = np.array(values, dtype=float)
    F = EmpiricalCdf(v)
    grid = np.linspace(-6, 6, 241)
    Fx = F(grid)
    assert np.all(np.diff(Fx) >= 0)
    for x in np.unique(v):
        k = np.count_nonzero(v == x)
        # right-continuous: value at the jump equals the value just to the right
        assert F(x) == F(x + 1e-9)
        assert F(x) - F(x - 1e-9) == pytest.approx(k / v.size)


def test_z_process_zero_case():
    F = EmpiricalCdf(np.array([0.0, 1.0]))
    assert z_process_eval(F, lambda x: 0.5, 0.5) == 0.0


def test_z_process_arithmetic():
    F = EmpiricalCdf(np.array([-1.0, -0.5, 1.0, 2.0]))
    assert F(0.0) == 0.5
    assert z_process_eval(F, lambda x: 0.25, 0.0, n=4) == pytest.approx(0.5)


def test_z_process_binomial_variance():
    n, reps = 200, 5000
    gen = RngSeed(2024).generator()
    z = np.array([z_process_eval(EmpiricalCdf(gen.standard_normal(n)), stats.norm.cdf, 0.0) for _ in range(reps)])
    assert z.var() == pytest.approx(0.25, abs=0.02)


# ----------------------------------------------------------------- median

@pytest.mark.parametrize("values,expected", [([3, 1, 2], 2.0), ([1, 2, 3, 4], 2.5), ([5], 5.0)])
def test_median_examples(values, expected):
    assert median(Sample(np.array(values, dtype=float))) == expected


@given(values=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30), a=st.floats(0.01, 100), b=st.floats(-100, 100),
       seed=st.integers(0, 1000))
@settings(max_examples=60, deadline=None)
def test_median_permutation_and_affine(values, a, b, seed):
    v = np.array(values)
    perm = np.random.default_rng(seed).permutation(v)
    assert median(perm) == median(v)
    assert median(a * v + b) == pytest.approx(a * median(v) + b, rel=1e-12, abs=1e-9)


# -------------------------------------------------------------------- I/O

def test_read_sample_with_comments(tmp_path):
    p = tmp_path / "data.txt"
    p.write_text("# header\n1.5\n\n  -2 # inline\n3e0\n")
    assert read_sample(p).values.tolist() == [1.5, -2.0, 3.0]


@pytest.mark.parametrize("text,line", [("1\nabc\n", 2), ("1\n2\n\nnan\n", 4), ("inf\n", 1)])
def test_read_sample_reports_line(tmp_path, text, line):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(DataParseError) as err:
        read_sample(p)
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_read_sample_empty(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("# nothing\n")
    with pytest.raises(DataParseError):
        read_sample(p)


@given(values=st.lists(finite, min_size=1, max_size=20))
@settings(max_examples=20, deadline=None)
def test_write_read_roundtrip(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("rt") / "s.txt"
    write_sample(p, values, header="roundtrip")
    assert read_sample(p).values.tolist() == [float(v) for v in values]
