from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percoflow import catalog, dist, exchange


def test_qpochhammer_basics():
    assert catalog.qpochhammer(0.3, 0.5, 0) == 1.0
    assert catalog.qpochhammer(0.5, 0.5, 2) == pytest.approx(0.5 * 0.75)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.95), st.integers(0, 60))
def test_qpochhammer_against_mpmath(a, q, n):
    assert catalog.qpochhammer(a, q, n) == pytest.approx(float(mpmath.qp(a, q, n)), rel=1e-12)


@pytest.mark.parametrize("p", [0.1, 0.5, 0.8, 0.95])
def test_euler_phi_against_mpmath(p):
    assert catalog.euler_phi(p) == pytest.approx(float(mpmath.qp(p, p)), rel=1e-13)


def test_euler_phi_half():
    assert catalog.euler_phi(0.5) == pytest.approx(0.2887880951, abs=1e-10)


@pytest.mark.parametrize("p", [0.3, 0.5, 0.8])
def test_euler_distribution_normalization_and_match(p):
    tau = catalog.euler_distribution(p, 300)
    assert math.fsum(tau) == pytest.approx(1.0, abs=1e-10)
    assert tau[0] * catalog.q_binomial_sum(p) == pytest.approx(1.0, abs=1e-12)
    ex = exchange.stationary_measure(dist.geometric(p), 300).normalized
    assert np.allclose(tau, ex, atol=1e-10, rtol=0)


def test_euler_distribution_rejects_short_range():
    with pytest.raises(ValueError):
        catalog.euler_distribution(0.9, 5)


@pytest.mark.parametrize("m", range(2, 11))
def test_naor_exact_sums_to_one(m):
    assert math.fsum(catalog.naor_exact(m)) == pytest.approx(1.0, abs=1e-12)


def test_naor_m2():
    assert np.allclose(catalog.naor_exact(2), [0.5, 0.5])


@pytest.mark.parametrize("m", [2, 3, 4, 6])
def test_uniform_law_matches_exchange_and_urn(m):
    tau = catalog.uniform_stationary_law(m)
    assert np.allclose(tau, exchange.stationary_measure(dist.uniform(m), m - 1).normalized, atol=1e-12)
    # P[m - T = k] = tau_k
    assert np.allclose(catalog.naor_exact(m)[::-1], tau, atol=1e-12)


def test_naor_large_m_no_overflow():
    law = catalog.naor_exact(200)
    assert np.all(np.isfinite(law)) and math.fsum(law) == pytest.approx(1.0, abs=1e-10)


def test_naor_urn_simulation():
    res = catalog.naor_urn(5, 10**5, seed=3)
    tau = catalog.uniform_stationary_law(5)
    assert 0.5 * np.abs(res.spare_law - tau).sum() < 0.02


def test_inverse_beta():
    assert catalog.inverse_beta_cdf(1.0, 1.0) == pytest.approx(0.5)
    assert catalog.inverse_beta_cdf(2.0, 1e6) == pytest.approx(1.0, abs=1e-5)
    assert catalog.inverse_beta_cdf(2.0, 1e-6) < 1e-11
