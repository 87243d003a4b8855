"""Compiled inner loops. Every reduction runs in a fixed order, so results are reproducible."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def conv_at_points(f, rf, gflip, rg, pts):
    """(f*g)(x) for each row x of ``pts``.

    ``f`` and ``gflip`` are flattened centred boxes of radius ``rf`` and ``rg``;
    ``gflip`` holds g(-z), so that g(x - y) = gflip(y - x) walks forward in memory.
    """
    d = pts.shape[1]
    nf = 2 * rf + 1
    ng = 2 * rg + 1
    out = np.zeros(pts.shape[0])
    lo = np.empty(d, np.int64)
    hi = np.empty(d, np.int64)
    idx = np.empty(d, np.int64)
    for p in range(pts.shape[0]):
        ok = True
        for i in range(d):
            x = pts[p, i]
            lo[i] = max(-rf, x - rg)
            hi[i] = min(rf, x + rg)
            if lo[i] > hi[i]:
                ok = False
        if not ok:
            continue
        L = hi[d - 1] - lo[d - 1] + 1
        if d == 1:
            fo = lo[0] + rf
            go = lo[0] - pts[p, 0] + rg
            s = 0.0
            for j in range(L):
                s += f[fo + j] * gflip[go + j]
            out[p] = s
            continue
        for i in range(d):
            idx[i] = lo[i]
        M = hi[d - 2] - lo[d - 2] + 1
        acc = 0.0
        while True:
            fo = 0
            go = 0
            for i in range(d - 2):
                fo = fo * nf + (idx[i] + rf)
                go = go * ng + (idx[i] - pts[p, i] + rg)
            fo = (fo * nf + (lo[d - 2] + rf)) * nf + (lo[d - 1] + rf)
            go = (go * ng + (lo[d - 2] - pts[p, d - 2] + rg)) * ng + (lo[d - 1] - pts[p, d - 1] + rg)
            s = 0.0
            for r in range(M):
                for j in range(L):
                    s += f[fo + j] * gflip[go + j]
                fo += nf
                go += ng
            acc += s
            k = d - 3
            while k >= 0:
                idx[k] += 1
                if idx[k] <= hi[k]:
                    break
                idx[k] = lo[k]
                k -= 1
            if k < 0:
                break
        out[p] = acc
    return out


@njit(cache=True)
def triple_power_sum(d, radius, u, v, table_a, table_b):
    """Sum over w in the box of table_a[|w|^2] * table_b[|w-u|^2] * table_b[|w-v|^2]."""
    idx = np.empty(d, np.int64)
    for i in range(d):
        idx[i] = -radius
    total = 0.0
    while True:
        s0 = 0
        su = 0
        sv = 0
        for i in range(d - 1):
            w = idx[i]
            s0 += w * w
            su += (w - u[i]) * (w - u[i])
            sv += (w - v[i]) * (w - v[i])
        row = 0.0
        for w in range(-radius, radius + 1):
            a = s0 + w * w
            b = su + (w - u[d - 1]) * (w - u[d - 1])
            c = sv + (w - v[d - 1]) * (w - v[d - 1])
            row += table_a[a] * table_b[b] * table_b[c]
        total += row
        k = d - 2
        while k >= 0:
            idx[k] += 1
            if idx[k] <= radius:
                break
            idx[k] = -radius
            k -= 1
        if k < 0:
            break
    return total


@njit(cache=True)
def dfs_histogram(d, n_max, radius, kmax, hist):
    """Depth-first enumeration of all walks of length <= n_max from the origin.

    ``hist[n, cell, k]`` counts n-step walks ending at ``cell`` with exactly k
    coincident time pairs. Visit counts are kept per cell, so a step onto a
    site adds its current visit count to the running pair total.
    """
    side = 2 * radius + 1
    ncell = side ** d
    visits = np.zeros(ncell, np.int32)
    offs = np.empty(2 * d, np.int64)
    stride = 1
    for i in range(d - 1, -1, -1):
        offs[2 * i] = stride
        offs[2 * i + 1] = -stride
        stride *= side
    origin = 0
    for i in range(d):
        origin = origin * side + radius
    pos = np.empty(n_max + 1, np.int64)
    kk = np.empty(n_max + 1, np.int64)
    choice = np.empty(n_max + 1, np.int64)
    pos[0] = origin
    kk[0] = 0
    choice[0] = -1
    visits[origin] = 1
    hist[0, origin, 0] += 1
    if n_max == 0:
        return
    n = 0
    while n >= 0:
        choice[n] += 1
        if choice[n] >= 2 * d:
            visits[pos[n]] -= 1
            n -= 1
            continue
        nxt = pos[n] + offs[choice[n]]
        k = kk[n] + visits[nxt]
        visits[nxt] += 1
        if k <= kmax:
            hist[n + 1, nxt, k] += 1
        if n + 1 < n_max:
            n += 1
            pos[n] = nxt
            kk[n] = k
            choice[n] = -1
        else:
            visits[nxt] -= 1


@njit(cache=True)
def dfs_weights(d, n_max, radius, qpow, prune_zero, weights):
    """As :func:`dfs_histogram` but accumulating (1 - beta)^k directly.

    With ``prune_zero`` set (beta = 1) a subtree is skipped as soon as its
    weight vanishes; every descendant would contribute zero.
    """
    side = 2 * radius + 1
    ncell = side ** d
    visits = np.zeros(ncell, np.int32)
    offs = np.empty(2 * d, np.int64)
    stride = 1
    for i in range(d - 1, -1, -1):
        offs[2 * i] = stride
        offs[2 * i + 1] = -stride
        stride *= side
    origin = 0
    for i in range(d):
        origin = origin * side + radius
    pos = np.empty(n_max + 1, np.int64)
    kk = np.empty(n_max + 1, np.int64)
    choice = np.empty(n_max + 1, np.int64)
    pos[0] = origin
    kk[0] = 0
    choice[0] = -1
    visits[origin] = 1
    weights[0, origin] += 1.0
    if n_max == 0:
        return
    n = 0
    while n >= 0:
        choice[n] += 1
        if choice[n] >= 2 * d:
            visits[pos[n]] -= 1
            n -= 1
            continue
        nxt = pos[n] + offs[choice[n]]
        k = kk[n] + visits[nxt]
        if prune_zero and k > 0:
            continue
        visits[nxt] += 1
        weights[n + 1, nxt] += qpow[k]
        if n + 1 < n_max:
            n += 1
            pos[n] = nxt
            kk[n] = k
            choice[n] = -1
        else:
            visits[nxt] -= 1
