"""Driving laws mu on the nonnegative integers.

A law is a finite head ``mu_0, ..., mu_{K-1}`` followed by one of three
analytic tails.  Keeping the tail family closed means the series questions
that decide recurrence, transience and coverage have exact answers.

Tail models (``T(n) = P[Y > n]``):

* ``finite``    -- ``T(n) = 0`` for ``n >= K - 1``.
* ``geometric`` -- ``mu_n = A p**n`` for ``n >= K``, so ``T(n) = T(K-1) p**(n-K+1)``.
* ``power``     -- ``T(n) = c / n`` for ``n >= K - 1``, so ``mu_n = c / (n (n-1))``
  for ``n >= K``.  Requires ``K >= 2`` and ``c < K - 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .rng import Stream

MASS_TOL = 1e-12


class TailModel(str, Enum):
    FINITE = "finite"
    GEOMETRIC = "geometric"
    POWER = "power"


class SeriesVerdict(str, Enum):
    CONVERGES = "converges"
    DIVERGES = "diverges"
    INCONCLUSIVE = "inconclusive"


class InvalidDistribution(ValueError):
    pass


@dataclass(frozen=True)
class DistributionSpec:
    head: tuple[float, ...]
    model: TailModel = TailModel.FINITE
    p: float | None = None
    c: float | None = None
    _head_sf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "head", tuple(float(x) for x in self.head))
        object.__setattr__(self, "model", TailModel(self.model))
        head = np.asarray(self.head, dtype=np.float64)
        K = head.size
        if K < 1:
            raise InvalidDistribution("head must contain at least mu_0")
        if np.any(head < 0) or np.any(head > 1) or not np.all(np.isfinite(head)):
            raise InvalidDistribution("head probabilities must lie in [0, 1]")
        if not 0.0 < head[0] < 1.0:
            raise InvalidDistribution("mu_0 must lie strictly between 0 and 1")

        tail = self._tail_mass_from_params(K)
        total = math.fsum(self.head) + tail
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidDistribution(f"total mass is {total!r}, expected 1")

        # T(n) for n = 0..K-1, summed from the top so small tails stay accurate
        sf = np.empty(K)
        acc = tail
        for n in range(K - 1, -1, -1):
            sf[n] = acc
            acc += head[n]
        sf.flags.writeable = False
        object.__setattr__(self, "_head_sf", sf)

    def _tail_mass_from_params(self, K: int) -> float:
        if self.model is TailModel.FINITE:
            if self.p is not None or self.c is not None:
                raise InvalidDistribution("finite support takes no tail parameters")
            return 0.0
        if self.model is TailModel.GEOMETRIC:
            if self.p is None or not 0.0 < self.p < 1.0:
                raise InvalidDistribution("geometric tail needs ratio p in (0, 1)")
            tail = 1.0 - math.fsum(self.head)
            if tail <= 0.0:
                raise InvalidDistribution("geometric tail needs positive tail mass")
            return tail
        if self.c is None or not 0.0 < self.c < math.inf:
            raise InvalidDistribution("power tail needs c in (0, inf)")
        if K < 2:
            raise InvalidDistribution("power tail needs K >= 2")
        if self.c >= K - 1:
            raise InvalidDistribution(f"power tail needs c < K - 1 = {K - 1}")
        return self.c / (K - 1)

    # -- basic quantities -------------------------------------------------

    @property
    def K(self) -> int:
        return len(self.head)

    @property
    def tail_mass(self) -> float:
        """``T(K-1) = sum_{k >= K} mu_k``."""
        return float(self._head_sf[-1])

    @property
    def n0(self) -> int | None:
        """Largest support point for finite support, else None."""
        if self.model is not TailModel.FINITE:
            return None
        nz = np.flatnonzero(np.asarray(self.head) > 0)
        return int(nz[-1])

    @property
    def mu0(self) -> float:
        return self.head[0]

    def sf(self, n):
        """Exact tail ``T(n) = P[Y > n]``; ``T(n) = 1`` for ``n < 0``."""
        n_arr = np.asarray(n, dtype=np.int64)
        out = np.ones(n_arr.shape, dtype=np.float64)
        K = self.K
        in_head = (n_arr >= 0) & (n_arr < K)
        out[in_head] = self._head_sf[n_arr[in_head]]
        beyond = n_arr >= K
        if np.any(beyond):
            nb = n_arr[beyond].astype(np.float64)
            if self.model is TailModel.FINITE:
                out[beyond] = 0.0
            elif self.model is TailModel.GEOMETRIC:
                out[beyond] = self.tail_mass * np.exp((nb - K + 1) * math.log(self.p))
            else:
                out[beyond] = self.c / nb
        return out if out.ndim else float(out)

    def cdf(self, n):
        """Exact ``F(n) = sum_{l <= n} mu_l``."""
        n_arr = np.asarray(n, dtype=np.int64)
        out = np.zeros(n_arr.shape, dtype=np.float64)
        csum = np.cumsum(self.head)
        # small F: direct sum; F near 1: complement of the exact tail
        csum = np.where(self._head_sf < 0.5, 1.0 - self._head_sf, csum)
        in_head = (n_arr >= 0) & (n_arr < self.K)
        out[in_head] = csum[n_arr[in_head]]
        rest = n_arr >= self.K
        if np.any(rest):
            out[rest] = 1.0 - self.sf(n_arr[rest])
        return out if out.ndim else float(out)

    def log_cdf(self, n):
        """``log F(n)``, using ``log1p(-T(n))`` where the tail is small."""
        t = np.asarray(self.sf(n), dtype=np.float64)
        f = np.asarray(self.cdf(n), dtype=np.float64)
        with np.errstate(divide="ignore"):
            out = np.where(t < 0.5, np.log1p(-np.minimum(t, 0.5)), np.log(np.maximum(f, 0.0)))
        return out if out.ndim else float(out)

    def pmf(self, n):
        n_arr = np.asarray(n, dtype=np.int64)
        out = np.zeros(n_arr.shape, dtype=np.float64)
        in_head = (n_arr >= 0) & (n_arr < self.K)
        out[in_head] = np.asarray(self.head)[n_arr[in_head]]
        beyond = n_arr >= self.K
        if np.any(beyond):
            nb = n_arr[beyond].astype(np.float64)
            if self.model is TailModel.GEOMETRIC:
                out[beyond] = self.tail_mass * (1 - self.p) * np.exp((nb - self.K) * math.log(self.p))
            elif self.model is TailModel.POWER:
                out[beyond] = self.c / (nb * (nb - 1))
        return out if out.ndim else float(out)

    def mean(self) -> float:
        head_part = math.fsum(n * m for n, m in enumerate(self.head))
        if self.model is TailModel.FINITE:
            return head_part
        if self.model is TailModel.POWER:
            return math.inf
        # sum_{n >= K} n A p^n with A p^K = T(K-1) (1 - p)
        p, K = self.p, self.K
        return head_part + self.tail_mass * (K + p / (1 - p))

    # -- sampling ---------------------------------------------------------

    def quantile(self, u):
        """Inverse CDF: the smallest ``n`` with ``F(n) > u``, for ``u`` in (0, 1).

        Evaluated on the survival side (``T(n) < 1 - u``) so that the heavy
        tails are inverted without cancellation.
        """
        u_arr = np.asarray(u, dtype=np.float64)
        scalar = u_arr.ndim == 0
        w = 1.0 - np.atleast_1d(u_arr)
        idx = np.searchsorted(-self._head_sf, -w, side="right").astype(np.int64)
        K = self.K
        in_tail = idx >= K
        if np.any(in_tail):
            wt = w[in_tail]
            if self.model is TailModel.FINITE:
                idx[in_tail] = self.n0
            elif self.model is TailModel.GEOMETRIC:
                j = np.floor(np.log(wt / self.tail_mass) / math.log(self.p)).astype(np.int64) + 1
                idx[in_tail] = K - 1 + np.maximum(j, 1)
            else:
                n = np.floor(np.minimum(self.c / wt, 2.0**62)).astype(np.int64) + 1
                idx[in_tail] = np.maximum(n, K)
        return int(idx[0]) if scalar else idx.reshape(u_arr.shape)

    def sample(self, stream: Stream, counters) -> np.ndarray:
        """Draws ``Y`` for each counter of ``stream`` (identical counters give identical draws)."""
        return self.quantile(stream.uniform(counters))

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        tail: dict = {"model": self.model.value, "K": self.K}
        if self.p is not None:
            tail["p"] = self.p
        if self.c is not None:
            tail["c"] = self.c
        return {"head": list(self.head), "tail": tail}

    @classmethod
    def from_dict(cls, data: dict) -> DistributionSpec:
        try:
            head = [float(x) for x in data["head"]]
            tail = data.get("tail", {"model": "finite"})
            model = TailModel(tail.get("model", "finite"))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidDistribution(f"malformed distribution object: {exc}") from exc
        if "K" in tail and int(tail["K"]) != len(head):
            raise InvalidDistribution(f"K={tail['K']} disagrees with head length {len(head)}")
        if data.get("normalize"):
            if model is TailModel.POWER:
                return power_tail(float(tail["c"]), len(head), head)
            if model is TailModel.FINITE:
                head = list(np.asarray(head) / math.fsum(head))
        return cls(tuple(head), model, p=tail.get("p"), c=tail.get("c"))


# -- constructors ----------------------------------------------------------


def finite(weights) -> DistributionSpec:
    """Finite support law proportional to ``weights``."""
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0 or np.any(w < 0) or w.sum() <= 0:
        raise InvalidDistribution("weights must be nonnegative with positive sum")
    return DistributionSpec(tuple(w / w.sum()))


def uniform(m: int) -> DistributionSpec:
    """Uniform law on ``{0, ..., m-1}``."""
    if m < 2:
        raise InvalidDistribution("uniform law needs m >= 2")
    return finite(np.ones(m))


def two_point(n: int, p: float) -> DistributionSpec:
    """``mu_0 = 1 - p`` and ``mu_n = p``."""
    if n < 1 or not 0 < p < 1:
        raise InvalidDistribution("two-point law needs n >= 1 and p in (0, 1)")
    w = np.zeros(n + 1)
    w[0], w[n] = 1 - p, p
    return DistributionSpec(tuple(w))


def geometric(p: float) -> DistributionSpec:
    """Geometric law with parameter ``1 - p``: ``mu_n = (1 - p) p**n``."""
    if not 0 < p < 1:
        raise InvalidDistribution("geometric law needs p in (0, 1)")
    return DistributionSpec((1.0 - p,), TailModel.GEOMETRIC, p=p)


def power_tail(c: float, K: int, head_weights=None, mu0: float | None = None) -> DistributionSpec:
    """Law with ``T(n) = c / n`` for ``n >= K - 1``.

    The head weights are rescaled to the remaining mass ``1 - c / (K - 1)``.
    Without weights, ``mu0`` (default half the head mass) sits at 0 and the
    rest of the head is spread evenly over ``1..K-1``.
    """
    if K < 2 or not 0 < c < K - 1:
        raise InvalidDistribution("power tail needs K >= 2 and 0 < c < K - 1")
    head_mass = 1.0 - c / (K - 1)
    if head_weights is None:
        if mu0 is None:
            mu0 = head_mass / 2
        if not 0 < mu0 <= head_mass:
            raise InvalidDistribution(f"mu0 must lie in (0, {head_mass}]")
        w = np.full(K, (head_mass - mu0) / (K - 1)) if K > 1 else np.zeros(1)
        w[0] = mu0
    else:
        w = np.asarray(head_weights, dtype=np.float64)
        if w.size != K or np.any(w < 0) or w.sum() <= 0:
            raise InvalidDistribution("head weights must have length K and positive mass")
        w = w / w.sum() * head_mass
    # absorb rounding so that head + tail sums to 1 as closely as possible
    w[-1] += head_mass - math.fsum(w)
    return DistributionSpec(tuple(w), TailModel.POWER, c=c)


def parse(text: str) -> DistributionSpec:
    """Parses an inline law description, a JSON object, or a path to a JSON file.

    Inline forms::

        support01:p=0.6        mu_0 = 0.4, mu_1 = 0.6
        uniform:m=3            uniform on {0, 1, 2}
        twopoint:n=3,p=0.5     mu_0 = 0.5, mu_3 = 0.5
        geometric:p=0.5        mu_n = 0.5 ** (n + 1)
        power:c=2,K=8,mu0=0.5
        finite:0.2,0.3,0.5
    """
    text = text.strip()
    if text.startswith("{"):
        try:
            return DistributionSpec.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InvalidDistribution(f"bad JSON: {exc}") from exc
    name, _, args = text.partition(":")
    name = name.lower()
    if name == "finite":
        try:
            return finite([float(x) for x in args.split(",")])
        except ValueError as exc:
            raise InvalidDistribution(f"bad weights in {text!r}") from exc
    builders = {
        "support01": lambda kw: two_point(1, kw["p"]),
        "uniform": lambda kw: uniform(int(kw["m"])),
        "twopoint": lambda kw: two_point(int(kw["n"]), kw["p"]),
        "geometric": lambda kw: geometric(kw["p"]),
        "power": lambda kw: power_tail(kw["c"], int(kw.get("K", 8)), mu0=kw.get("mu0")),
    }
    if name in builders:
        kw = {}
        for item in filter(None, args.split(",")):
            key, eq, value = item.partition("=")
            if not eq:
                raise InvalidDistribution(f"expected key=value, got {item!r}")
            try:
                kw[key.strip()] = float(value)
            except ValueError as exc:
                raise InvalidDistribution(f"bad number in {item!r}") from exc
        try:
            return builders[name](kw)
        except KeyError as exc:
            raise InvalidDistribution(f"{name} needs parameter {exc}") from exc
    path = Path(text)
    if path.suffix == ".json" or path.exists():
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise InvalidDistribution(f"cannot read {path}: {exc}") from exc
        return DistributionSpec.from_dict(data.get("dist", data))
    raise InvalidDistribution(f"unrecognized distribution {text!r}")


# -- series tests ------------------------------------------------------------


def moment_diverges(spec: DistributionSpec, n: int) -> bool:
    """Whether ``sum_k k**n mu_k`` diverges."""
    if n < 1:
        raise ValueError("moment order must be >= 1")
    return spec.model is TailModel.POWER


@dataclass(frozen=True)
class KestenSeries:
    """Terms ``prod_{k=1}^m F(k-1)`` for ``m = 0..m_max`` (the ``m = 0`` term is the empty product)."""

    terms: np.ndarray
    partial_sums: np.ndarray
    verdict: SeriesVerdict

    @property
    def tail_ratio(self) -> float:
        """Last term relative to the partial sum (a horizon diagnostic, not a bound)."""
        return float(self.terms[-1] / self.partial_sums[-1])


def log_cdf_products(spec: DistributionSpec, m_max: int) -> np.ndarray:
    """``log prod_{j=0}^{m-1} F(j)`` for ``m = 0..m_max``."""
    logs = spec.log_cdf(np.arange(m_max))
    return np.concatenate([[0.0], np.cumsum(logs)])


def kesten_series(spec: DistributionSpec, m_max: int) -> KestenSeries:
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    terms = np.exp(log_cdf_products(spec, m_max))
    if spec.model is TailModel.POWER:
        verdict = SeriesVerdict.CONVERGES if spec.c > 1 else SeriesVerdict.DIVERGES
    else:
        # prod F(j) tends to a positive limit
        verdict = SeriesVerdict.DIVERGES
    return KestenSeries(terms, np.cumsum(terms), verdict)
