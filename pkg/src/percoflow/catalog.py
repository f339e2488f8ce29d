"""Closed-form laws used as reference values: Naor's urn, the Euler
distribution with q-Pochhammer products, and the inverse-Beta scaling limit."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .parallel import map_blocks
from .rng import Stream, uniforms_from_keys


def qpochhammer(a: float, q: float, n: int | float) -> float:
    """``(a; q)_n = prod_{k=0}^{n-1} (1 - a q^k)``; ``n = inf`` uses :func:`euler_cutoff`."""
    if n == 0:
        return 1.0
    if math.isinf(n):
        n = euler_cutoff(q)
    k = np.arange(int(n))
    return float(np.exp(np.sum(np.log1p(-a * q**k))))


def euler_cutoff(q: float, eps: float = 1e-16) -> int:
    """Number of factors after which ``prod_{k > K} (1 - q^k)`` differs from 1 by less than ``eps``.

    The dropped factors satisfy ``1 >= prod >= 1 - q^(K+1) / (1 - q)``.
    """
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    K = math.ceil((math.log(eps) + math.log(1 - q)) / math.log(q))
    return max(K, 1)


def euler_phi(p: float) -> float:
    """Euler's function ``(p; p)_inf``."""
    K = euler_cutoff(p)
    k = np.arange(1, K + 1)
    return float(np.exp(math.fsum(np.log1p(-(p**k)))))


def euler_distribution(p: float, K: int) -> np.ndarray:
    """``tau_n = (p;p)_inf p^n / (p;p)_n`` for ``n = 0..K``.

    Raises if ``K`` is too small to hold all but ``1e-10`` of the mass.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    n = np.arange(K + 1)
    log_poch = np.concatenate([[0.0], np.cumsum(np.log1p(-(p ** n[1:])))])
    tau = euler_phi(p) * np.exp(n * math.log(p) - log_poch)
    if math.fsum(tau) <= 1 - 1e-10:
        raise ValueError(f"K={K} keeps only {math.fsum(tau)!r} of the mass")
    return tau


def q_binomial_sum(p: float, terms: int = 10_000) -> float:
    """``sum_n p^n / (p;p)_n`` summed directly until the terms vanish."""
    total, term = 1.0, 1.0
    for n in range(1, terms):
        term *= p / (1 - p**n)
        total += term
        if term < 1e-18 * total:
            break
    return total


def uniform_stationary_law(m: int) -> np.ndarray:
    """``tau_n = m!/m^m (m-n) m^(n-1)/n!`` for ``n = 0..m-1``, in log space."""
    if m < 2:
        raise ValueError("m must be >= 2")
    n = np.arange(m)
    logs = (math.lgamma(m + 1) - m * math.log(m) + np.log(m - n)
            + (n - 1) * math.log(m) - np.array([math.lgamma(k + 1) for k in n]))
    return np.exp(logs)


def naor_exact(m: int) -> np.ndarray:
    """``P[T = n] = (m-1)! m^-n n / (m-n)!`` for ``n = 1..m`` (index ``n - 1``)."""
    if m < 2:
        raise ValueError("m must be >= 2")
    n = np.arange(1, m + 1)
    logs = (math.lgamma(m) - n * math.log(m) + np.log(n)
            - np.array([math.lgamma(m - k + 1) for k in n]))
    return np.exp(logs)


@dataclass(frozen=True)
class NaorResult:
    m: int
    T: np.ndarray          # first time a red ball is drawn, per trial
    exact_T: np.ndarray    # P[T = n], n = 1..m

    @property
    def spare_law(self) -> np.ndarray:
        """Empirical law of ``m - T`` on ``0..m-1``."""
        return np.bincount(self.m - self.T, minlength=self.m) / self.T.size

    @property
    def histogram(self) -> np.ndarray:
        return np.bincount(self.m - self.T, minlength=self.m)


def naor_urn(m: int, trials: int, seed: int = 0, *, workers: int = 1) -> NaorResult:
    """Simulates the urn: ``m`` balls, one red; each drawn white ball is replaced by a red one.

    At draw ``t`` there are ``t`` red balls, so trial ``i`` stops at the first
    ``t`` with ``u_{i,t} < t / m``.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    root = Stream.root(seed, "naor")

    def run(a: int, b: int):
        keys = root.child_keys(np.arange(a, b))
        u = uniforms_from_keys(keys[:, None], np.arange(m, dtype=np.uint64)[None, :])
        red = u < (np.arange(1, m + 1) / m)
        return np.argmax(red, axis=1) + 1

    T = np.concatenate(map_blocks(run, trials, 4096, workers))
    return NaorResult(m, T, naor_exact(m))


def inverse_beta_cdf(c: float, y: float) -> float:
    """``y^c / (1 + y)^c``, the limit law of ``X_n / n`` under a ``c/n`` tail."""
    if c <= 0 or y <= 0:
        raise ValueError("c and y must be positive")
    return math.exp(c * (math.log(y) - math.log1p(y)))
