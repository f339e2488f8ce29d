"""Counter-based random streams.

A draw is a pure function of ``(seed, stream path, counter)``: the stream key
is built by hashing the seed together with a path of integers (subcommand tag,
trial index, ...) and the counter is hashed on top of it with the SplitMix64
output function.  Nothing is consumed sequentially, so a vertex of a graph
window or a step of a path always receives the same uniform no matter how the
work is ordered or split across workers.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(GOLDEN)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _U_M1
        z = (z ^ (z >> _S27)) * _U_M2
    return z ^ (z >> _S31)


def _mix_int(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def tag_id(name: str) -> int:
    """Stable 32-bit id of a stream name (e.g. a subcommand)."""
    return zlib.crc32(name.encode("utf-8"))


def _extend(key: int, part: int) -> int:
    return _mix_int(key ^ _mix_int((part + GOLDEN) & MASK64))


def uniforms_from_keys(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Uniforms in the open interval (0, 1) for broadcast ``keys`` x ``counters``.

    The 53 high bits of the hash are used, offset by half a grid step, so the
    result is never exactly 0 or 1.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = keys + (counters + _ONE) * _U_GOLDEN
    h = mix64(state) >> _S11
    return (h.astype(np.float64) + 0.5) * (2.0**-53)


@dataclass(frozen=True)
class Stream:
    """A node in the tree of random streams, identified by a 64-bit key."""

    key: int

    @classmethod
    def root(cls, seed: int, tag: str | int = 0) -> Stream:
        tag_int = tag_id(tag) if isinstance(tag, str) else int(tag)
        return cls(_extend(_mix_int(int(seed) ^ 0x5EED5EED5EED5EED), tag_int))

    def child(self, *path: int) -> Stream:
        key = self.key
        for part in path:
            key = _extend(key, int(part))
        return Stream(key)

    def child_keys(self, indices: np.ndarray) -> np.ndarray:
        """Vectorized ``child(i).key`` for an array of indices."""
        idx = np.asarray(indices, dtype=np.uint64)
        with np.errstate(over="ignore"):
            inner = mix64(idx + _U_GOLDEN)
        return mix64(np.uint64(self.key) ^ inner)

    def uniform(self, counters: np.ndarray | int) -> np.ndarray:
        return uniforms_from_keys(np.uint64(self.key), counters)

    def generator(self) -> np.random.Generator:
        """Philox generator keyed by this stream, for draws that need numpy's samplers."""
        return np.random.Generator(np.random.Philox(key=self.key))
