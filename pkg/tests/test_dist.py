from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percoflow import dist
from percoflow.dist import (DistributionSpec, InvalidDistribution, SeriesVerdict, TailModel,
                            kesten_series, moment_diverges)
from percoflow.rng import Stream


def test_cdf_uniform01():
    s = dist.uniform(2)
    assert s.cdf(0) == 0.5
    assert s.cdf(1) == 1.0


def test_cdf_geometric_half():
    assert dist.geometric(0.5).cdf(1) == pytest.approx(0.75, abs=1e-15)


def test_cdf_power_tail_value():
    s = dist.power_tail(2.0, 8)
    assert s.cdf(10) == pytest.approx(0.8, abs=1e-15)
    # T(n) = c/n for every n >= K - 1
    n = np.arange(7, 200)
    assert np.allclose(s.sf(n), 2.0 / n, rtol=1e-13)


def test_finite_cdf_reaches_one_exactly():
    s = dist.finite([0.3, 0.1, 0.0, 0.6])
    assert s.n0 == 3
    assert s.cdf(3) == 1.0
    assert s.cdf(100) == 1.0


@pytest.mark.parametrize("bad", [(1.0,), (0.0, 1.0), (0.5, 0.4), (-0.1, 1.1)])
def test_invalid_head_rejected(bad):
    with pytest.raises(InvalidDistribution):
        DistributionSpec(bad)


def test_finite_normalizes_weights():
    assert dist.finite([1, 1, 2]).head == (0.25, 0.25, 0.5)
    with pytest.raises(InvalidDistribution):
        dist.finite([0, 0])


def test_power_tail_needs_c_below_K_minus_1():
    with pytest.raises(InvalidDistribution):
        dist.power_tail(8.0, 8)
    with pytest.raises(InvalidDistribution):
        dist.power_tail(1.0, 1)


def test_sample_small_u_gives_zero():
    eps = 1e-3
    s = dist.finite([1 - eps, eps])
    assert s.quantile(0.5) == 0
    assert s.quantile(1 - eps - 1e-9) == 0


def test_finite_support_never_exceeds_n0():
    s = dist.finite([0.2, 0.3, 0.5])
    y = s.sample(Stream.root(1, "t"), np.arange(10**6))
    assert y.max() <= 2 and y.min() >= 0


def test_geometric_empirical_mean_within_3_sigma():
    p = 0.5
    s = dist.geometric(p)
    y = s.sample(Stream.root(3, "t"), np.arange(10**6))
    mean = p / (1 - p)
    sigma = math.sqrt(p / (1 - p) ** 2 / y.size)
    assert abs(y.mean() - mean) < 3 * sigma


def test_sample_is_deterministic():
    s = dist.power_tail(2.0, 8)
    a = s.sample(Stream.root(9, "t").child(4), np.arange(1000))
    b = s.sample(Stream.root(9, "t").child(4), np.arange(1000))
    assert np.array_equal(a, b)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8), st.integers(0, 2**32))
def test_quantile_matches_cdf(weights, seed):
    w = np.asarray(weights) / math.fsum(weights)
    w[-1] = 1.0 - math.fsum(w[:-1])
    s = dist.finite(list(w))
    u = Stream.root(seed).uniform(np.arange(200))
    n = s.quantile(u)
    # n is the smallest value with F(n) >= u
    assert np.all(s.cdf(n) >= u - 1e-12)
    assert np.all((n == 0) | (s.cdf(np.maximum(n - 1, 0)) < u + 1e-12))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(0, 300))
def test_geometric_pmf_sums_to_cdf(p, n):
    s = dist.geometric(p)
    assert math.fsum(s.pmf(np.arange(n + 1))) == pytest.approx(s.cdf(n), abs=1e-12)


def test_power_pmf_form():
    s = dist.power_tail(1.5, 6)
    n = np.arange(6, 50)
    assert np.allclose(s.pmf(n), 1.5 / (n * (n - 1)), rtol=1e-12)


def test_moment_divergence():
    assert moment_diverges(dist.uniform(2), 1) is False
    assert moment_diverges(dist.power_tail(0.5, 4), 1) is True
    assert moment_diverges(dist.geometric(0.9), 3) is False


def test_kesten_power_c2_converges():
    assert kesten_series(dist.power_tail(2.0, 8), 100).verdict is SeriesVerdict.CONVERGES
    assert kesten_series(dist.power_tail(1.0, 8), 100).verdict is SeriesVerdict.DIVERGES


def test_kesten_uniform01_terms():
    ks = kesten_series(dist.uniform(2), 50)
    # m = 0 is the empty product
    assert ks.terms[0] == 1.0
    assert np.allclose(ks.terms[1:], 0.5)
    assert ks.verdict is SeriesVerdict.DIVERGES
    assert ks.partial_sums[-1] == pytest.approx(1.0 + 0.5 * 50)


def test_kesten_geometric_limit():
    ks = kesten_series(dist.geometric(0.5), 200)
    assert ks.terms[-1] == pytest.approx(0.2887880951, abs=1e-10)
    assert ks.verdict is SeriesVerdict.DIVERGES


def test_parse_inline_forms():
    assert dist.parse("support01:p=0.6").head == pytest.approx((0.4, 0.6))
    assert dist.parse("uniform:m=3").n0 == 2
    assert dist.parse("twopoint:n=3,p=0.5").pmf(3) == 0.5
    assert dist.parse("geometric:p=0.5").model is TailModel.GEOMETRIC
    assert dist.parse("power:c=2,K=8,mu0=0.6").mu0 == pytest.approx(0.6)
    with pytest.raises(InvalidDistribution):
        dist.parse("bogus:x=1")
    with pytest.raises(InvalidDistribution):
        dist.parse("missing_file.json")


def test_dict_round_trip(tmp_path):
    for s in (dist.uniform(4), dist.geometric(0.3), dist.power_tail(2.0, 8, mu0=0.5)):
        again = DistributionSpec.from_dict(json.loads(json.dumps(s.to_dict())))
        assert again == s
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(s.to_dict()))
        assert dist.parse(str(path)) == s
