"""Finite windows of the directed lattices N0^n, Z^n and the directed n-ary tree.

Lattice vertices are coordinate tuples stored in row-major order.  Tree
vertices are words over ``{1..n}`` (the root is the empty tuple) stored in
level order, so the children of index ``i`` are ``n*i + 1 .. n*i + n``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

INF = math.inf


class OutOfWindow(ValueError):
    pass


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: int
    vertices: list


class _Box:
    """Shared machinery for the axis-aligned boxes ``[lower, lower + extent)^dim``."""

    dim: int
    lower: int
    extent: int
    family: str

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.extent,) * self.dim

    @property
    def size(self) -> int:
        return self.extent**self.dim

    def contains(self, v) -> bool:
        return len(v) == self.dim and all(self.lower <= c < self.lower + self.extent for c in v)

    def _check(self, v):
        v = tuple(int(c) for c in v)
        if not self.contains(v):
            raise OutOfWindow(f"{v} is not in the {self.family} window")
        return v

    def index(self, v) -> int:
        v = self._check(v)
        return int(np.ravel_multi_index(tuple(c - self.lower for c in v), self.shape))

    def vertex(self, i: int) -> tuple[int, ...]:
        return tuple(int(c) + self.lower for c in np.unravel_index(i, self.shape))

    def vertices(self):
        rng = range(self.lower, self.lower + self.extent)
        return itertools.product(rng, repeat=self.dim)

    def distance(self, x, y):
        x, y = self._check(x), self._check(y)
        if all(a <= b for a, b in zip(x, y)):
            return sum(b - a for a, b in zip(x, y))
        return INF

    def ball(self, x, r: int) -> Ball:
        x = self._check(x)
        if r < 0:
            raise ValueError("radius must be >= 0")
        top = self.lower + self.extent
        ranges = [range(c, min(c + r, top)) for c in x]
        verts = [y for y in itertools.product(*ranges) if sum(b - a for a, b in zip(x, y)) < r]
        return Ball(x, r, verts)

    def in_coverers(self, y) -> list:
        """All window vertices ``x`` with ``d(x, y) < inf``."""
        y = self._check(y)
        return list(itertools.product(*[range(self.lower, c + 1) for c in y]))


@dataclass(frozen=True)
class Lattice(_Box):
    """The box ``{0..side-1}^dim`` of N0^dim.  Every coverer of a box vertex lies in the box."""

    dim: int
    side: int
    family = "N0^n"
    exact = True

    def __post_init__(self):
        if self.dim < 1 or self.side < 1:
            raise ValueError("dim and side must be >= 1")

    @property
    def lower(self) -> int:
        return 0

    @property
    def extent(self) -> int:
        return self.side


@dataclass(frozen=True)
class IntegerLattice(_Box):
    """The box ``{-margin..side-1}^dim`` of Z^dim.

    Only ``{0..side-1}^dim`` is observed; the margin supplies coverers, and
    coverers outside the window are accounted for by an error bound rather
    than simulated.
    """

    dim: int
    side: int
    margin: int
    family = "Z^n"
    exact = False

    def __post_init__(self):
        if self.dim < 1 or self.side < 1 or self.margin < 0:
            raise ValueError("dim, side must be >= 1 and margin >= 0")

    @property
    def lower(self) -> int:
        return -self.margin

    @property
    def extent(self) -> int:
        return self.side + self.margin

    def observed_mask(self) -> np.ndarray:
        axis = np.arange(self.extent) >= self.margin
        mask = axis
        for _ in range(self.dim - 1):
            mask = np.logical_and.outer(mask, axis)
        return mask.reshape(self.shape)


@dataclass(frozen=True)
class Tree:
    """Vertices of the directed n-ary tree down to ``depth`` (inclusive)."""

    arity: int
    depth: int
    family = "D_n"
    exact = True

    def __post_init__(self):
        if self.arity < 2 or self.depth < 0:
            raise ValueError("arity must be >= 2 and depth >= 0")

    def level_start(self, k: int) -> int:
        n = self.arity
        return (n**k - 1) // (n - 1)

    @property
    def size(self) -> int:
        return self.level_start(self.depth + 1)

    @property
    def shape(self) -> tuple[int]:
        return (self.size,)

    def level(self, k: int) -> slice:
        return slice(self.level_start(k), self.level_start(k + 1))

    def contains(self, v) -> bool:
        return len(v) <= self.depth and all(1 <= c <= self.arity for c in v)

    def _check(self, v):
        v = tuple(int(c) for c in v)
        if not self.contains(v):
            raise OutOfWindow(f"{v} is not in the depth-{self.depth} tree window")
        return v

    def index(self, v) -> int:
        v = self._check(v)
        offset = 0
        for c in v:
            offset = offset * self.arity + (c - 1)
        return self.level_start(len(v)) + offset

    def vertex(self, i: int) -> tuple[int, ...]:
        if not 0 <= i < self.size:
            raise OutOfWindow(f"index {i} outside the window")
        k = 0
        while self.level_start(k + 1) <= i:
            k += 1
        offset = i - self.level_start(k)
        word = []
        for _ in range(k):
            offset, c = divmod(offset, self.arity)
            word.append(c + 1)
        return tuple(reversed(word))

    def vertices(self):
        for k in range(self.depth + 1):
            yield from itertools.product(range(1, self.arity + 1), repeat=k)

    def distance(self, x, y):
        x, y = self._check(x), self._check(y)
        if y[: len(x)] == x:
            return len(y) - len(x)
        return INF

    def ball(self, x, r: int) -> Ball:
        x = self._check(x)
        if r < 0:
            raise ValueError("radius must be >= 0")
        verts = []
        for k in range(min(r, self.depth - len(x) + 1)):
            verts.extend(x + tail for tail in itertools.product(range(1, self.arity + 1), repeat=k))
        return Ball(x, r, verts)

    def in_coverers(self, y) -> list:
        """The ancestor chain of ``y``, root first, ending with ``y`` itself."""
        y = self._check(y)
        return [y[:k] for k in range(len(y) + 1)]


GraphWindow = Lattice | IntegerLattice | Tree
