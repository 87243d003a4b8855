"""Hyperoctahedral symmetry of Z^d: orbits under coordinate permutations and sign flips."""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np


def canonical(point) -> tuple[int, ...]:
    """Orbit representative: sorted absolute values."""
    return tuple(sorted(abs(int(c)) for c in point))


def orbit(point) -> set[tuple[int, ...]]:
    """All images of ``point`` under permutations and sign flips."""
    pts = set()
    for perm in itertools.permutations(point):
        for signs in itertools.product((1, -1), repeat=len(point)):
            pts.add(tuple(s * c for s, c in zip(signs, perm)))
    return pts


@lru_cache(maxsize=32)
def orbit_reps(d: int, radius: int) -> np.ndarray:
    """Canonical representatives of all orbits meeting the box of given l-infinity radius."""
    reps = list(itertools.combinations_with_replacement(range(radius + 1), d))
    arr = np.array(reps, dtype=np.int64).reshape(len(reps), d)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=16)
def orbit_index(d: int, radius: int) -> np.ndarray:
    """For every cell of the box (C order), the row of its orbit in :func:`orbit_reps`."""
    side = 2 * radius + 1
    base = radius + 1
    reps = orbit_reps(d, radius)
    rep_keys = np.zeros(len(reps), dtype=np.int64)
    for i in range(d):
        rep_keys = rep_keys * base + reps[:, i]
    # reps come out of combinations_with_replacement in lexicographic order,
    # so their keys are already sorted
    absvals = np.abs(np.arange(side, dtype=np.int8) - radius).astype(np.int8)
    grids = np.meshgrid(*([absvals] * d), indexing="ij")
    stacked = np.stack([g.ravel() for g in grids], axis=1)
    stacked.sort(axis=1)
    keys = np.zeros(stacked.shape[0], dtype=np.int64)
    for i in range(d):
        keys = keys * base + stacked[:, i]
    idx = np.searchsorted(rep_keys, keys)
    idx = idx.astype(np.int32)
    idx.setflags(write=False)
    return idx


def symmetry_defect(values: np.ndarray) -> float:
    """Largest absolute change of a centred array under the generating symmetries.

    Checking the d axis flips and the d-1 adjacent transpositions suffices,
    since they generate the full group.
    """
    d = values.ndim
    worst = 0.0
    for ax in range(d):
        worst = max(worst, _maxabs(values, np.flip(values, axis=ax)))
    for ax in range(d - 1):
        worst = max(worst, _maxabs(values, np.swapaxes(values, ax, ax + 1)))
    return worst


def _maxabs(a: np.ndarray, b: np.ndarray) -> float:
    if a.dtype == object:
        diffs = [abs(x - y) for x, y in zip(a.ravel(), b.ravel())]
        return float(max(diffs, default=0))
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))
