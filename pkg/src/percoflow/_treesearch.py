"""Compiled depth-first search for an uncovered vertex at a given tree depth.

The field ``Y`` is drawn lazily from the same counter hash as
:func:`percoflow.rng.uniforms_from_keys` (vertex ``i`` in level order uses
counter ``i``), so a search sees exactly the realization that
:func:`percoflow.percolation.sample_cover` would build on the full window.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

from .dist import DistributionSpec, TailModel

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MODEL_CODES = {TailModel.FINITE: 0, TailModel.GEOMETRIC: 1, TailModel.POWER: 2}


@nb.njit(cache=True, inline="always")
def _uniform(key, counter):
    z = key + (np.uint64(counter) + np.uint64(1)) * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    z = z ^ (z >> np.uint64(31))
    return (np.float64(z >> np.uint64(11)) + 0.5) * (2.0**-53)


@nb.njit(cache=True)
def _quantile(u, head_sf, model, p, c, tail_mass, n0):
    w = 1.0 - u
    K = head_sf.shape[0]
    for n in range(K):
        if head_sf[n] < w:
            return n
    if model == 0:
        return n0
    if model == 1:
        j = np.int64(math.floor(math.log(w / tail_mass) / math.log(p))) + 1
        return K - 1 + max(j, 1)
    n = np.int64(math.floor(min(c / w, 2.0**62))) + 1
    return max(n, K)


@nb.njit(cache=True)
def _has_uncovered(key, arity, depth, head_sf, model, p, c, tail_mass, n0):
    y0 = _quantile(_uniform(key, 0), head_sf, model, p, c, tail_mass, n0)
    # a vertex at level k with reach r can only lead to an uncovered vertex at
    # level `depth` if r <= depth - k
    if y0 > depth:
        return False
    if depth == 0:
        return y0 <= 0
    idx = np.empty(depth + 1, np.int64)
    rch = np.empty(depth + 1, np.int64)
    nxt = np.empty(depth + 1, np.int64)
    idx[0] = 0
    rch[0] = y0
    nxt[0] = 0
    level = 0
    while level >= 0:
        if nxt[level] == arity:
            level -= 1
            continue
        child = idx[level] * arity + 1 + nxt[level]
        nxt[level] += 1
        y = _quantile(_uniform(key, child), head_sf, model, p, c, tail_mass, n0)
        r = max(rch[level] - 1, y)
        k = level + 1
        if r > depth - k:
            continue
        if k == depth:
            return True
        level = k
        idx[k] = child
        rch[k] = r
        nxt[k] = 0
    return False


@nb.njit(cache=True, nogil=True)
def _probe_keys(keys, arity, depth, head_sf, model, p, c, tail_mass, n0):
    out = np.empty(keys.shape[0], np.bool_)
    for t in range(keys.shape[0]):
        out[t] = _has_uncovered(keys[t], arity, depth, head_sf, model, p, c, tail_mass, n0)
    return out


def probe_keys(spec: DistributionSpec, keys: np.ndarray, arity: int, depth: int) -> np.ndarray:
    """For each trial key: is some vertex at ``depth`` uncovered?"""
    return _probe_keys(
        np.ascontiguousarray(keys, dtype=np.uint64), int(arity), int(depth),
        np.ascontiguousarray(spec._head_sf, dtype=np.float64), _MODEL_CODES[spec.model],
        float(spec.p or 0.5), float(spec.c or 1.0), spec.tail_mass,
        int(spec.n0 if spec.n0 is not None else -1),
    )
