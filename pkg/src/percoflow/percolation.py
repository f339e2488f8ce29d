"""Boolean percolation on graph windows: sampling, uncovered-set statistics and
the exact series that describe the uncovered set of N0.

Every vertex ``x`` covers the open ball ``B_{Y_x}(x)``.  Coverage is computed
by propagating the remaining reach ``R(y) = max_{x -> y} (Y_x - d(x, y))``:
``y`` is covered iff ``R(y) > 0``.  On the lattices the distance is the L1
length of ``y - x`` for ``x <= y``, so the max-plus propagation factors into
one running-maximum scan per axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage, stats
from scipy.special import gammaln

from .dist import DistributionSpec, TailModel, moment_diverges
from .exchange import Recurrence, classify, simulate_path
from .graphs import GraphWindow, IntegerLattice, Lattice, Tree
from .parallel import map_blocks
from .rng import Stream, uniforms_from_keys

_CELLS_PER_BLOCK = 1 << 20


class Coverage(str, Enum):
    COVERED_AS = "covered-almost-surely"
    NOT_COVERED_AS = "not-covered-almost-surely"


class CoveredAlmostSurely(RuntimeError):
    """Raised instead of simulating a Z^n window whose outside coverage cannot be bounded."""

    verdict = Coverage.COVERED_AS


class CouplingMismatch(AssertionError):
    pass


# -- sampling ---------------------------------------------------------------


def reach(window: GraphWindow, y: np.ndarray) -> np.ndarray:
    """Remaining reach at every window vertex; leading axes of ``y`` are batch axes."""
    r = np.asarray(y, dtype=np.int64)
    if isinstance(window, Tree):
        r = r.copy()
        for k in range(1, window.depth + 1):
            parents = np.repeat(r[..., window.level(k - 1)], window.arity, axis=-1)
            lv = window.level(k)
            r[..., lv] = np.maximum(r[..., lv], parents - 1)
        return r
    nd = window.dim
    for a in range(nd):
        axis = r.ndim - nd + a
        shape = [1] * r.ndim
        shape[axis] = window.extent
        idx = np.arange(window.extent, dtype=np.int64).reshape(shape)
        r = np.maximum.accumulate(r + idx, axis=axis) - idx
    return r


def field_values(window: GraphWindow, spec: DistributionSpec, keys: np.ndarray) -> np.ndarray:
    """``Y`` for every window vertex, one row per key; vertex ``i`` uses counter ``i``."""
    keys = np.atleast_1d(np.asarray(keys, dtype=np.uint64))
    u = uniforms_from_keys(keys[:, None], np.arange(window.size, dtype=np.uint64)[None, :])
    return spec.quantile(u).reshape((keys.size,) + window.shape)


def _trial_stream(seed: int) -> Stream:
    return Stream.root(seed, "perc")


@dataclass(frozen=True)
class CoverSample:
    window: GraphWindow
    y: np.ndarray
    covered: np.ndarray
    seed: int
    trial: int = 0
    truncation_bound: float = 0.0

    @property
    def uncovered(self) -> np.ndarray:
        return ~self.covered

    def uncovered_vertices(self) -> list:
        return [self.window.vertex(int(i)) for i in np.flatnonzero(~self.covered.ravel())]


def sample_cover(window: GraphWindow, spec: DistributionSpec, seed: int = 0, *,
                 trial: int = 0, y=None) -> CoverSample:
    """One realization of ``V_mu`` on ``window``.

    Exact on N0^n and tree windows.  On a Z^n window it is exact conditional
    on no coverage from outside the window, and the probability of such
    coverage is bounded by ``truncation_bound``.
    """
    bound = 0.0
    if isinstance(window, IntegerLattice):
        bound = z_truncation_bound(window, spec)
        if math.isinf(bound):
            raise CoveredAlmostSurely(
                f"moment {window.dim} of mu diverges: Z^{window.dim} is covered almost surely")
    if y is None:
        key = _trial_stream(seed).child(trial).key
        y = field_values(window, spec, np.uint64(key))[0]
    y = np.asarray(y, dtype=np.int64).reshape(window.shape)
    covered = reach(window, y) > 0
    return CoverSample(window, y, covered, seed, trial, bound)


def coupling_check(spec: DistributionSpec, n: int, seed: int = 0, *, trial: int = 0,
                   y=None) -> bool:
    """Checks ``V_mu(N0) & [0, n] == {k <= n : X_k > 0}`` on one shared sequence ``Y``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if y is None:
        y = spec.sample(Stream.root(seed, "coupling").child(trial), np.arange(n + 1))
    y = np.asarray(y, dtype=np.int64)
    cover = sample_cover(Lattice(1, len(y)), spec, seed, y=y)
    path = simulate_path(spec, len(y) - 1, y=y)
    positive = path.x > 0
    if not np.array_equal(cover.covered, positive):
        k = int(np.flatnonzero(cover.covered != positive)[0])
        raise CouplingMismatch(
            f"seed {seed} trial {trial}: vertex {k} covered={bool(cover.covered[k])} "
            f"but X_{k}={int(path.x[k])}")
    return True


# -- analytic sequences -----------------------------------------------------------


def q_sequence(spec: DistributionSpec, m_max: int) -> np.ndarray:
    """``q_m = P[m uncovered in N0] = prod_{j=0}^m F(j)`` for ``m = 0..m_max``."""
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    return np.exp(np.cumsum(spec.log_cdf(np.arange(m_max + 1))))


@dataclass(frozen=True)
class UncoveredMean:
    value: float
    converged: bool
    remainder: float


def expected_uncovered_line(spec: DistributionSpec, m_max: int) -> UncoveredMean:
    """``E #V_mu^c(N0) = sum_m q_m`` truncated at ``m_max``.

    Only transient chains have a finite value; otherwise the result is
    ``inf`` with ``converged=False``.  For a power tail ``q_m ~ C m^-c`` and
    the reported remainder is ``q_{m_max} m_max / (c - 1)``.
    """
    if classify(spec) is not Recurrence.TRANSIENT:
        return UncoveredMean(math.inf, False, math.inf)
    q = q_sequence(spec, m_max)
    remainder = float(q[-1] * m_max / (spec.c - 1))
    return UncoveredMean(float(math.fsum(q)), True, remainder)


# -- coverage of Z^n ----------------------------------------------------------------


def coverage_criterion(spec: DistributionSpec, family: str, n: int) -> Coverage:
    """Whether ``V_mu = V`` almost surely.

    On Z^n this happens iff the n-th moment diverges.  On N0^n and the tree
    the origin/root has itself as its only coverer, so it stays uncovered
    with probability ``mu_0 > 0``.
    """
    family = family.upper().replace("^N", "")
    if family in ("Z", "ZN"):
        return Coverage.COVERED_AS if moment_diverges(spec, n) else Coverage.NOT_COVERED_AS
    if family in ("N0", "N0N", "D", "DN", "TREE"):
        return Coverage.NOT_COVERED_AS
    raise ValueError(f"unknown graph family {family!r}")


def _log_comb(n: np.ndarray, k: int) -> np.ndarray:
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def z_truncation_bound(window: IntegerLattice, spec: DistributionSpec) -> float:
    """Union bound on P[a vertex outside ``window`` covers an observed vertex].

    An outside vertex ``z`` reaches the observed orthant only through the
    point ``max(z, 0)``, at distance ``k = sum_j max(-z_j, 0)``.  Grouping
    ``z`` by the set of its ``s`` negative coordinates (at least one below
    ``-margin``) gives at most ``C(n, s) side^(n-s) C(k-1, s-1)`` vertices at
    distance ``k >= margin + s``, each covering with probability ``T(k)``.
    Returns ``inf`` when the n-th moment diverges.
    """
    if not isinstance(window, IntegerLattice):
        raise TypeError("truncation bounds apply to Z^n windows only")
    n = window.dim
    if moment_diverges(spec, n):
        return math.inf
    total = 0.0
    for s in range(1, n + 1):
        k0 = window.margin + s
        inner = 0.0
        chunk = 4096
        while True:
            ks = np.arange(k0, k0 + chunk)
            tail = spec.sf(ks)
            if spec.model is TailModel.FINITE and not np.any(tail > 0):
                break
            with np.errstate(divide="ignore"):
                terms = np.exp(_log_comb(ks - 1, s - 1) + np.log(tail))
            inner += math.fsum(terms)
            if terms[-1] <= 1e-20 * max(inner, 1e-300) and terms[-1] <= terms[-2]:
                break
            k0 += chunk
        total += math.comb(n, s) * window.side ** (n - s) * inner
    return total


# -- Monte Carlo census ----------------------------------------------------------------


@dataclass(frozen=True)
class GeometricFit:
    p_hat: float
    chi2: float
    dof: int
    pvalue: float


@dataclass(frozen=True)
class UncoveredStats:
    counts: np.ndarray
    censored: np.ndarray
    components: np.ndarray | None = None
    geometric: GeometricFit | None = None
    truncation_bound: float = 0.0
    seed: int = 0

    @property
    def trials(self) -> int:
        return int(self.counts.size)

    @property
    def mean(self) -> float:
        return float(self.counts.mean())

    @property
    def var(self) -> float:
        return float(self.counts.var(ddof=1)) if self.trials > 1 else 0.0

    @property
    def stderr(self) -> float:
        return math.sqrt(self.var / self.trials)

    @property
    def histogram(self) -> np.ndarray:
        return np.bincount(self.counts)

    @property
    def censored_fraction(self) -> float:
        return float(self.censored.mean())

    @property
    def fully_covered_fraction(self) -> float:
        return float(np.mean(self.counts == 0))


def geometric_fit(counts: np.ndarray, min_expected: float = 5.0) -> GeometricFit:
    """Chi-square fit of ``P[N = k] = p (1-p)^k`` with ``p`` the observed ``P[N = 0]``."""
    counts = np.asarray(counts)
    N = counts.size
    p = float(np.mean(counts == 0))
    if p in (0.0, 1.0):
        return GeometricFit(p, math.nan, 0, math.nan)
    k = 0
    while N * p * (1 - p) ** (k + 1) >= min_expected and N * (1 - p) ** (k + 2) >= min_expected:
        k += 1
    observed = np.bincount(np.minimum(counts, k + 1), minlength=k + 2).astype(float)
    expected = N * p * (1 - p) ** np.arange(k + 2)
    expected[-1] = N * (1 - p) ** (k + 1)
    if observed.size < 3:
        return GeometricFit(p, math.nan, 0, math.nan)
    chi2, pvalue = stats.chisquare(observed, expected, ddof=1)
    return GeometricFit(p, float(chi2), observed.size - 2, float(pvalue))


def _far_boundary(window: GraphWindow, width: int) -> np.ndarray:
    if isinstance(window, Tree):
        mask = np.zeros(window.size, dtype=bool)
        mask[window.level_start(max(window.depth - width + 1, 0)):] = True
        return mask
    axis = np.arange(window.extent) >= window.extent - width
    mask = axis
    for _ in range(window.dim - 1):
        mask = np.logical_or.outer(mask, axis)
    return mask.reshape(window.shape)


def uncovered_census(window: GraphWindow, spec: DistributionSpec, trials: int, seed: int = 0, *,
                     workers: int = 1, censor_width: int = 1,
                     count_components: bool = False) -> UncoveredStats:
    """Per-trial ``#V_mu^c`` inside the window (the observed part for Z^n).

    A trial is right-censored when an uncovered vertex lies within
    ``censor_width`` of the far boundary, where the window may be cutting off
    more uncovered vertices.  On a one-dimensional N0 window the counts are
    also fitted against the geometric law.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    bound = 0.0
    observed = None
    if isinstance(window, IntegerLattice):
        bound = z_truncation_bound(window, spec)
        if math.isinf(bound):
            raise CoveredAlmostSurely(
                f"moment {window.dim} of mu diverges: Z^{window.dim} is covered almost surely")
        observed = window.observed_mask()
    far = _far_boundary(window, censor_width)
    root = _trial_stream(seed)
    lattice = not isinstance(window, Tree)

    def run(a: int, b: int):
        keys = root.child_keys(np.arange(a, b))
        unc = reach(window, field_values(window, spec, keys)) <= 0
        if observed is not None:
            unc &= observed
        flat = unc.reshape(b - a, -1)
        counts = flat.sum(axis=1)
        censored = (flat & far.reshape(1, -1)).any(axis=1)
        comps = None
        if count_components and lattice:
            comps = np.array([ndimage.label(u)[1] for u in unc])
        return counts, censored, comps

    block = max(1, _CELLS_PER_BLOCK // window.size)
    parts = map_blocks(run, trials, block, workers)
    counts = np.concatenate([p[0] for p in parts]).astype(np.int64)
    censored = np.concatenate([p[1] for p in parts])
    comps = np.concatenate([p[2] for p in parts]) if count_components and lattice else None
    fit = None
    if isinstance(window, Lattice) and window.dim == 1:
        fit = geometric_fit(counts)
    return UncoveredStats(counts, censored, comps, fit, bound, seed)
