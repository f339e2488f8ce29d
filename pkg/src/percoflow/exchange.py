"""The constant-decrement random exchange process ``X_{n+1} = max(X_n - 1, Y_{n+1})``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dist import DistributionSpec, SeriesVerdict, TailModel, kesten_series
from .parallel import map_blocks
from .rng import Stream, uniforms_from_keys

_LOG_MAX = math.log(np.finfo(np.float64).max)


class Recurrence(str, Enum):
    POSITIVE_RECURRENT = "positive-recurrent"
    NULL_RECURRENT = "null-recurrent"
    TRANSIENT = "transient"


class ConvergenceError(RuntimeError):
    """Power iteration hit its iteration cap."""

    def __init__(self, message: str, last: float, residual: float):
        super().__init__(f"{message} (last={last!r}, residual={residual:.3e})")
        self.last = last
        self.residual = residual


class SaturationError(OverflowError):
    def __init__(self, largest_safe_x: int):
        super().__init__(f"stationary measure overflows beyond x = {largest_safe_x}")
        self.largest_safe_x = largest_safe_x


def default_size(spec: DistributionSpec) -> int:
    if spec.model is TailModel.FINITE:
        return spec.n0 + 1
    return max(64, spec.K + 32)


# -- paths ---------------------------------------------------------------------


def step(x: int, y_next: int) -> int:
    return max(x - 1, y_next)


@dataclass(frozen=True)
class ExchangePath:
    x: np.ndarray
    y: np.ndarray


def simulate_path(spec: DistributionSpec, n_steps: int, seed: int = 0, *, trial: int = 0,
                  y=None) -> ExchangePath:
    """Runs ``X_0 = Y_0`` and ``n_steps`` transitions.

    The driving values are ``Y_k = spec.sample(stream, k)`` on the ``exchange``
    stream of ``(seed, trial)``; passing ``y`` overrides them (``n_steps`` is
    then ``len(y) - 1``).
    """
    if y is None:
        if n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        stream = Stream.root(seed, "exchange").child(trial)
        y = spec.sample(stream, np.arange(n_steps + 1))
    ys = np.asarray(y, dtype=np.int64)
    out = [0] * len(ys)
    x = -1
    for k, yk in enumerate(ys.tolist()):
        x = yk if k == 0 else step(x, yk)
        out[k] = x
    return ExchangePath(np.asarray(out, dtype=np.int64), ys)


def simulate_endpoints(spec: DistributionSpec, n_steps: int, paths: int, seed: int = 0, *,
                       workers: int = 1, block_size: int = 1024) -> np.ndarray:
    """``X_{n_steps}`` of paths ``0..paths-1``; path ``t`` equals ``simulate_path(..., trial=t)``.

    The recursion runs step by step, vectorized across a block of paths.
    """
    if n_steps < 1 or paths < 1:
        raise ValueError("need n_steps >= 1 and paths >= 1")
    root = Stream.root(seed, "exchange")
    chunk = 1024

    def run(a: int, b: int):
        keys = root.child_keys(np.arange(a, b))[:, None]
        x = None
        for start in range(0, n_steps + 1, chunk):
            counters = np.arange(start, min(start + chunk, n_steps + 1), dtype=np.uint64)
            ys = spec.quantile(uniforms_from_keys(keys, counters[None, :]))
            for j in range(ys.shape[1]):
                x = ys[:, j] if x is None else np.maximum(x - 1, ys[:, j])
        return x

    return np.concatenate(map_blocks(run, paths, block_size, workers))


def occupation_law(path: np.ndarray, size: int) -> np.ndarray:
    """Empirical distribution of the visited states, states ``>= size`` lumped into the last bin."""
    counts = np.bincount(np.minimum(path, size - 1), minlength=size)
    return counts / counts.sum()


def marginal_cdf(spec: DistributionSpec, n: int, x) -> np.ndarray:
    """Exact ``P[X_n <= x] = prod_{j=x}^{x+n} F(j)``."""
    x_arr = np.atleast_1d(np.asarray(x, dtype=np.int64))
    out = np.empty(x_arr.shape)
    for i, xv in enumerate(x_arr):
        out[i] = math.exp(float(np.sum(spec.log_cdf(np.arange(xv, xv + n + 1)))))
    return out if np.ndim(x) else float(out[0])


# -- matrices --------------------------------------------------------------------


@dataclass(frozen=True)
class TransitionMatrix:
    matrix: np.ndarray
    exact: bool

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def transition_matrix(spec: DistributionSpec, size: int) -> TransitionMatrix:
    if size < 2:
        raise ValueError("truncation size must be >= 2")
    states = np.arange(size)
    mu = spec.pmf(states)
    P = np.where(states[None, :] >= states[:, None], mu[None, :], 0.0)
    P[states[1:], states[1:] - 1] = spec.cdf(states[1:] - 1)
    exact = spec.model is TailModel.FINITE and size > spec.n0
    return TransitionMatrix(P, exact)


def perron_root(A: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Perron root of a nonnegative matrix by power iteration.

    Starts from the all-ones vector, L1-normalizes every step, and stops once
    successive growth factors ``|A v|_1 / |v|_1`` differ by less than ``tol``.
    """
    A = np.asarray(A, dtype=np.float64)
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = A.shape[0]
    v = np.full(n, 1.0 / n)
    prev = math.nan
    lam = math.nan
    for _ in range(max_iter):
        w = A @ v
        lam = float(w.sum())
        if lam == 0.0:
            return 0.0
        w /= lam
        if abs(lam - prev) < tol:
            return lam
        prev, v = lam, w
    residual = float(np.abs(A @ v - lam * v).sum())
    raise ConvergenceError("power iteration did not converge", lam, residual)


def spectral_radius_P(spec: DistributionSpec, size: int | None = None, tol: float = 1e-12) -> float:
    """Perron root of the ``size`` truncation of P (a lower bound that increases with size)."""
    size = default_size(spec) if size is None else size
    if size < 2:
        raise ValueError("size must be >= 2")
    return perron_root(transition_matrix(spec, size).matrix, tol)


def green_partial(spec: DistributionSpec, x: int, y: int, z: float, N: int,
                  size: int | None = None) -> float:
    """``sum_{n=0}^N P^n_{x,y} z^n`` from powers of the truncated matrix.

    A path can only leave ``{0..size-1}`` and come back down to ``y`` within
    ``N`` steps when ``size <= y + N``, so the truncation is exact for
    ``size > max(x, y + N)`` (or whenever it contains the whole finite state
    space).
    """
    if z <= 0:
        raise ValueError("z must be positive")
    if size is None:
        size = max(x, y + N) + 1
    tm = transition_matrix(spec, max(size, 2))
    if not tm.exact and size <= max(x, y + N):
        raise ValueError(f"size {size} too small for exact {N}-step powers from {x} to {y}")
    if x >= tm.size or y >= tm.size:
        return 0.0
    row = np.zeros(tm.size)
    row[x] = 1.0
    total = row[y]
    zn = 1.0
    for _ in range(N):
        row = row @ tm.matrix
        zn *= z
        total += row[y] * zn
    return float(total)


# -- stationary measure ----------------------------------------------------------


@dataclass(frozen=True)
class StationaryMeasure:
    values: np.ndarray            # tau_0..tau_K with tau_0 = 1
    normalizable: bool
    normalized: np.ndarray | None  # tau / sum(tau) when the sum is finite

    def recursion_residual(self, spec: DistributionSpec) -> float:
        """Largest relative defect of ``tau_x = mu_x sum_{z<=x} tau_z + tau_{x+1} F(x)``."""
        tau = self.values
        x = np.arange(len(tau) - 1)
        lhs = tau[:-1]
        rhs = spec.pmf(x) * np.cumsum(tau)[:-1] + tau[1:] * spec.cdf(x)
        scale = np.maximum(np.abs(lhs), 1e-300)
        return float(np.max(np.abs(lhs - rhs) / scale))


def log_stationary(spec: DistributionSpec, K: int) -> np.ndarray:
    """``log tau_x`` for ``x = 0..K`` with ``tau_0 = 1``."""
    x = np.arange(K + 1)
    log_prod = np.concatenate([[0.0], np.cumsum(spec.log_cdf(np.arange(K)))])
    with np.errstate(divide="ignore"):
        return np.log(spec.sf(x - 1)) - log_prod


def stationary_measure(spec: DistributionSpec, K: int) -> StationaryMeasure:
    if K < 1:
        raise ValueError("K must be >= 1")
    logs = log_stationary(spec, K)
    over = np.flatnonzero(logs > _LOG_MAX)
    if over.size:
        raise SaturationError(int(over[0]) - 1)
    values = np.exp(logs)
    normalizable = math.isfinite(spec.mean())
    normalized = None
    if normalizable:
        normalized = values / _stationary_total(spec, values)
    return StationaryMeasure(values, normalizable, normalized)


def _stationary_total(spec: DistributionSpec, values: np.ndarray) -> float:
    if spec.model is TailModel.FINITE:
        return math.fsum(values[: spec.n0 + 1])
    # geometric tail: terms decay geometrically, extend past K until negligible
    K = len(values) - 1
    total = math.fsum(values)
    block = max(64, K)
    while True:
        logs = log_stationary(spec, K + block)[K + 1:]
        extra = np.exp(logs)
        total += math.fsum(extra)
        if extra[-1] < 1e-18 * total:
            return total
        K += block


# -- classification ----------------------------------------------------------------


def classify(spec: DistributionSpec) -> Recurrence:
    if math.isfinite(spec.mean()):
        return Recurrence.POSITIVE_RECURRENT
    if kesten_series(spec, 1).verdict is SeriesVerdict.CONVERGES:
        return Recurrence.TRANSIENT
    return Recurrence.NULL_RECURRENT
