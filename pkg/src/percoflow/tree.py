"""Percolation on the directed n-ary tree and its multitype branching process.

The probability ``r_m`` that some depth-m vertex is uncovered satisfies
``r_{m+1} = (1 - (1 - r_m)^n) F(m+1)`` with ``r_0 = mu_0``.  The covered
cluster of the root is a branching process whose mean matrix is ``n M``,
where ``M`` is the exchange transition matrix with state 0 removed; it
survives iff ``rho(M) > 1/n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _treesearch
from .dist import DistributionSpec, TailModel
from .exchange import default_size, perron_root, transition_matrix
from .graphs import Tree
from .parallel import map_blocks
from .percolation import field_values, reach
from .rng import Stream

DEFAULT_WINDOW_BUDGET = 1 << 27


# -- the r_m recurrence ----------------------------------------------------------


@dataclass(frozen=True)
class RSequence:
    """``r_0..r_m`` together with ``log(1 - r_m)``, which keeps precision once ``r_m`` is near 1."""

    log_complement: np.ndarray
    arity: int

    @property
    def r(self) -> np.ndarray:
        return -np.expm1(self.log_complement)


def r_recurrence(spec: DistributionSpec, n: int, m_max: int) -> RSequence:
    """Iterates ``1 - r_{m+1} = T(m+1) + F(m+1) (1 - r_m)^n`` in log space."""
    if n < 2:
        raise ValueError("arity must be >= 2")
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    ks = np.arange(m_max + 1)
    with np.errstate(divide="ignore"):
        log_tail = np.log(spec.sf(ks))
    log_f = spec.log_cdf(ks)
    out = np.empty(m_max + 1)
    out[0] = log_tail[0]
    for m in range(m_max):
        out[m + 1] = np.logaddexp(log_tail[m + 1], log_f[m + 1] + n * out[m])
    return RSequence(out, n)


def fixed_point(F_N: float, n: int = 2) -> float:
    """Nonzero fixed point ``2 - 1/F_N`` of ``x -> x (2 - x) F_N``."""
    if n != 2:
        raise ValueError("closed-form fixed point is only available for n = 2")
    if not 0.5 < F_N <= 1.0:
        raise ValueError("F_N must lie in (1/2, 1]")
    return 2.0 - 1.0 / F_N


def fixed_point_numeric(F_N: float, n: int, tol: float = 1e-15) -> float:
    """Largest fixed point of ``x -> (1 - (1 - x)^n) F_N`` by bisection (0 if only the trivial one)."""
    if n * F_N <= 1.0:
        return 0.0
    g = lambda x: (1.0 - (1.0 - x) ** n) * F_N - x
    # the slope at 0 is n F_N > 1, so g is positive just above 0
    lo, hi = 1e-9, 1.0
    while g(lo) <= 0:
        lo /= 10
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def logistic_closed_form(spec: DistributionSpec, m_max: int) -> tuple[float, RSequence]:
    """For finite support and n = 2, ``r_m = 1 - exp(-c 2^m)`` once ``m >= n_0``.

    ``c`` is fitted from the recurrence at ``m = n_0``; entries below ``n_0``
    are copied from the recurrence.
    """
    if spec.model is not TailModel.FINITE:
        raise ValueError("the logistic closed form needs finite support")
    n0 = spec.n0
    m_max = max(m_max, n0, 1)
    rec = r_recurrence(spec, 2, m_max)
    c = -rec.log_complement[n0] / 2.0**n0
    out = rec.log_complement.copy()
    m = np.arange(n0, m_max + 1)
    out[n0:] = -c * np.exp2(m)
    return float(c), RSequence(out, 2)


# -- mean matrix -------------------------------------------------------------------


@dataclass(frozen=True)
class MeanMatrix:
    matrix: np.ndarray  # rows/columns are types 1..size
    exact: bool

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def mean_matrix(spec: DistributionSpec, size: int | None = None) -> MeanMatrix:
    if size is None:
        size = spec.n0 if spec.model is TailModel.FINITE else default_size(spec)
    if size < 1:
        raise ValueError("size must be >= 1")
    tm = transition_matrix(spec, size + 1)
    exact = spec.model is TailModel.FINITE and size >= spec.n0
    return MeanMatrix(tm.matrix[1:, 1:].copy(), exact)


def rho_M(spec: DistributionSpec, size: int | None = None, tol: float = 1e-13) -> float:
    return perron_root(mean_matrix(spec, size).matrix, tol)


def two_point_mean_matrix(n: int, p: float) -> np.ndarray:
    """``M_{n,p}`` for ``mu_0 = 1 - p``, ``mu_n = p``."""
    M = np.zeros((n, n))
    M[:, -1] = p
    M[np.arange(1, n), np.arange(n - 1)] = 1 - p
    return M


def char_poly(n: int, p: float, z: float) -> float:
    """``det(z I - M_{n,p})`` by ``chi_k = z chi_{k-1} - p (1-p)^(k-1)``, ``chi_1 = z - p``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    chi = z - p
    for k in range(2, n + 1):
        chi = z * chi - p * (1 - p) ** (k - 1)
    return chi


def char_poly_closed(n: int, p: float, z: float) -> float:
    """``(p (1-p)^n + (z-1) z^n) / (p + z - 1)``; undefined at ``z = 1 - p``."""
    den = p + z - 1
    if den == 0:
        raise ZeroDivisionError("closed form has a removable pole at z = 1 - p")
    return (p * (1 - p) ** n + (z - 1) * z**n) / den


def char_poly_root(n: int, p: float, tol: float = 1e-15) -> float:
    """Largest zero of ``chi_{n,p}`` in (0, 1): the last sign change on a grid, refined by bisection."""
    f = lambda z: char_poly(n, p, z)
    grid = np.linspace(0.0, 1.0, 2001)
    vals = np.array([f(z) for z in grid])
    sign_change = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)
    if sign_change.size == 0:
        raise ValueError("no zero of chi in [0, 1]")
    i = sign_change[-1]
    lo, hi = grid[i], grid[i + 1]
    flo = f(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def infinite_path_criterion(spec: DistributionSpec, n: int, size: int | None = None,
                            tol: float = 1e-9) -> bool | None:
    """``True`` if ``rho(M) > 1/n + tol``, ``False`` if below ``1/n - tol``, else ``None``."""
    rho = rho_M(spec, size, min(tol, 1e-12))
    if rho > 1.0 / n + tol:
        return True
    if rho < 1.0 / n - tol:
        return False
    return None


# -- branching simulation -----------------------------------------------------------


@dataclass(frozen=True)
class BranchingResult:
    population: np.ndarray   # (runs, generations + 1) total individuals, frozen after saturation
    survived: np.ndarray     # alive at the last generation or saturated
    saturated: np.ndarray
    local_survived: np.ndarray  # a type-1 birth in the trailing quarter of generations
    type_counts: np.ndarray | None  # (runs, generations + 1, type_cap + 1) when recorded
    generations: int
    type_cap: int

    @property
    def runs(self) -> int:
        return int(self.survived.size)

    @property
    def extinct_at(self) -> np.ndarray:
        """First generation with no individuals, or -1."""
        dead = self.population == 0
        first = np.argmax(dead, axis=1)
        return np.where(dead.any(axis=1) & ~self.saturated, first, -1)

    @property
    def survival_fraction(self) -> float:
        return float(self.survived.mean())


def offspring_rows(spec: DistributionSpec, type_cap: int) -> np.ndarray:
    """Row ``x`` is the child-type law of a type-``x`` parent over types ``0..type_cap``.

    Type 0 means "not born" (only possible for type-1 parents); types above
    ``type_cap`` are lumped into ``type_cap``.
    """
    P = transition_matrix(spec, type_cap + 1).matrix
    rows = P.copy()
    rows[:, -1] += spec.sf(type_cap)
    return rows


def simulate_branching(spec: DistributionSpec, n: int, generations: int, seed: int = 0, *,
                       runs: int = 1, type_cap: int | None = None, pop_cap: int = 10**9,
                       record_types: bool = False, workers: int = 1,
                       block_size: int = 1024) -> BranchingResult:
    """Simulates the root cluster's branching process with per-type counters.

    Each individual of type ``x`` has ``n`` potential children with types drawn
    from row ``x`` of :func:`offspring_rows`, so a whole generation is one
    multinomial draw per type.  Runs whose population exceeds ``pop_cap`` are
    frozen and flagged as saturated (and count as surviving).
    """
    if generations < 1:
        raise ValueError("generations must be >= 1")
    if type_cap is None:
        type_cap = spec.n0 if spec.model is TailModel.FINITE else default_size(spec)
    type_cap = max(int(type_cap), 1)
    rows = offspring_rows(spec, type_cap)
    root = Stream.root(seed, "branching")
    tail_start = generations - max(generations // 4, 1) + 1

    def run(a: int, b: int):
        B = b - a
        y0 = np.minimum(spec.quantile(root.child(0).uniform(np.arange(a, b))), type_cap)
        rng = root.child(1, a).generator()
        counts = np.zeros((B, type_cap + 1), dtype=np.int64)
        counts[np.arange(B), y0] = 1
        counts[:, 0] = 0
        pop = np.zeros((B, generations + 1), dtype=np.int64)
        pop[:, 0] = counts.sum(axis=1)
        saturated = np.zeros(B, dtype=bool)
        local = np.zeros(B, dtype=bool)
        history = np.zeros((B, generations + 1, type_cap + 1), dtype=np.int64) if record_types else None
        if record_types:
            history[:, 0] = counts
        for g in range(1, generations + 1):
            new = np.zeros_like(counts)
            for x in range(1, type_cap + 1):
                parents = counts[:, x]
                if parents.any():
                    new += rng.multinomial(n * parents, rows[x])
            new[:, 0] = 0
            total = new.sum(axis=1)
            over = (total > pop_cap) & ~saturated
            saturated |= over
            new[saturated] = 0
            counts = new
            pop[:, g] = np.where(saturated, pop[:, g - 1], total)
            if g >= tail_start:
                local |= new[:, 1] > 0
            if record_types:
                history[:, g] = counts
            if not counts.any():
                pop[:, g + 1:] = np.where(saturated[:, None], pop[:, g:g + 1], 0)
                if record_types:
                    history[:, g + 1:] = 0
                break
        survived = (pop[:, -1] > 0) | saturated
        local |= saturated
        return pop, survived, saturated, local, history

    parts = map_blocks(run, runs, block_size, workers)
    cat = lambda i: np.concatenate([p[i] for p in parts])
    return BranchingResult(cat(0), cat(1), cat(2), cat(3),
                           cat(4) if record_types else None, generations, type_cap)


def expected_population(spec: DistributionSpec, n: int, generations: int,
                        size: int | None = None) -> float:
    """``E |Z_g| = sum_y mu_y e_y^T (n M)^g 1``, an upper bound on ``P[Z_g != 0]``."""
    M = mean_matrix(spec, size)
    v = np.ones(M.size)
    for _ in range(generations):
        v = n * (M.matrix @ v)
    types = np.arange(1, M.size + 1)
    return float(spec.pmf(types) @ v)


# -- uncovered vertices at depth m ------------------------------------------------------


@dataclass(frozen=True)
class ProbeResult:
    hits: int
    trials: int

    @property
    def r_hat(self) -> float:
        return self.hits / self.trials

    @property
    def stderr(self) -> float:
        r = self.r_hat
        return math.sqrt(r * (1 - r) / self.trials)


class BudgetExceeded(MemoryError):
    def __init__(self, required: int, budget: int):
        super().__init__(f"window sampling needs {required} vertex draws, budget is {budget}")
        self.required = required
        self.budget = budget


def tree_uncovered_probe(spec: DistributionSpec, n: int, m: int, trials: int, seed: int = 0, *,
                         method: str = "search", workers: int = 1,
                         budget: int = DEFAULT_WINDOW_BUDGET) -> ProbeResult:
    """Frequency of ``{some depth-m vertex is uncovered}``.

    Coverage of a tree vertex depends only on its ancestors, so both methods
    are exact.  ``"window"`` samples the whole depth-m window per trial and is
    limited by ``budget`` vertex draws in total; ``"search"`` draws the same
    field lazily in a pruned depth-first search and stops at the first
    uncovered vertex.
    """
    if trials < 1 or m < 0:
        raise ValueError("need trials >= 1 and m >= 0")
    root = Stream.root(seed, "tree")
    if method == "search":
        def run(a: int, b: int):
            return int(_treesearch.probe_keys(spec, root.child_keys(np.arange(a, b)), n, m).sum())
        block = 4096
    elif method == "window":
        window = Tree(n, m)
        required = window.size * trials
        if required > budget:
            raise BudgetExceeded(required, budget)
        level = window.level(m)

        def run(a: int, b: int):
            keys = root.child_keys(np.arange(a, b))
            r = reach(window, field_values(window, spec, keys))
            return int((r[:, level] <= 0).any(axis=1).sum())
        block = max(1, (1 << 20) // window.size)
    else:
        raise ValueError(f"unknown method {method!r}")
    hits = sum(map_blocks(run, trials, block, workers))
    return ProbeResult(hits, trials)
