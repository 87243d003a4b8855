"""Graphs on integer intervals, laces, compatible edges, and the K/J resummation quantities.

Edges are pairs ``(s, t)`` with ``s < t``. "Connected" is meant in the lace
sense: the endpoints of the interval are covered and every interior point is
strictly crossed by some edge.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from .walks import Walk, _check_beta, edge_bit

Edge = tuple[int, int]


class NotConnectedError(ValueError):
    pass


class IntervalTooLong(ValueError):
    pass


@dataclass(frozen=True)
class IntervalGraph:
    a: int
    b: int
    edges: frozenset

    def __init__(self, a: int, b: int, edges=()):
        if a > b:
            raise ValueError(f"empty interval [{a},{b}]")
        es = frozenset((int(s), int(t)) for s, t in edges)
        for s, t in es:
            if not (a <= s < t <= b):
                raise ValueError(f"edge {s}{t} does not fit in [{a},{b}]")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "edges", es)

    def __or__(self, other_edges) -> "IntervalGraph":
        return IntervalGraph(self.a, self.b, self.edges | frozenset(other_edges))


@dataclass(frozen=True)
class Lace:
    """A minimally connected graph with its edges listed left to right as a_1b_1, ..., a_Nb_N."""

    a: int
    b: int
    elements: tuple[Edge, ...]

    @property
    def graph(self) -> IntervalGraph:
        return IntervalGraph(self.a, self.b, self.elements)

    @property
    def edges(self) -> frozenset:
        return frozenset(self.elements)

    def __len__(self) -> int:
        return len(self.elements)


def is_connected(G: IntervalGraph) -> bool:
    """True iff a and b are edge endpoints and every a < c < b has an edge s < c < t."""
    if not G.edges or G.a == G.b:
        return False
    if not any(s == G.a for s, _ in G.edges) or not any(t == G.b for _, t in G.edges):
        return False
    # mark strictly crossed interior points
    crossed = [False] * (G.b - G.a + 1)
    for s, t in G.edges:
        for c in range(s + 1, t):
            crossed[c - G.a] = True
    return all(crossed[1:-1])


def lace_of(G: IntervalGraph) -> Lace:
    """Extract the lace of a connected graph.

    b_1 is the furthest point joined to a, and a_1 = a. Then repeatedly b_i
    is the furthest right endpoint among edges starting before b_{i-1}, and
    a_i the smallest left endpoint of an edge ending at b_i, until b_i = b.
    """
    if not is_connected(G):
        raise NotConnectedError(f"graph {sorted(G.edges)} on [{G.a},{G.b}] is not connected")
    a, b = G.a, G.b
    edges = G.edges
    b_prev = max(t for s, t in edges if s == a)
    elements = [(a, b_prev)]
    while b_prev != b:
        b_i = max(t for s, t in edges if s < b_prev)
        if b_i <= b_prev:
            raise RuntimeError(f"lace extraction stalled at {b_prev} on {sorted(edges)}")
        a_i = min(s for s, t in edges if t == b_i)
        elements.append((a_i, b_i))
        b_prev = b_i
    return Lace(a, b, tuple(elements))


def is_minimally_connected(G: IntervalGraph) -> bool:
    if not is_connected(G):
        return False
    return all(not is_connected(IntervalGraph(G.a, G.b, G.edges - {e})) for e in G.edges)


def all_edges(a: int, b: int) -> list[Edge]:
    return [(s, t) for t in range(a + 1, b + 1) for s in range(a, t)]


def compatible_edges(L: Lace) -> frozenset:
    """Edges st not in L for which adding st to L leaves the extracted lace unchanged."""
    out = []
    for e in all_edges(L.a, L.b):
        if e in L.edges:
            continue
        if lace_of(L.graph | {e}) == L:
            out.append(e)
    return frozenset(out)


def _gen_laces(N: int, a: int, b: int):
    # elements (s_i, t_i): s_1 = a, t_N = b, s_i < s_{i+1} < t_i < t_{i+1},
    # and consecutive-but-one edges do not overlap: t_i <= s_{i+2}
    def rec(elems):
        k = len(elems)
        s_last, t_last = elems[-1]
        if k == N:
            if t_last == b:
                yield tuple(elems)
            return
        if t_last >= b:
            return
        lo = s_last + 1
        if k >= 2:
            lo = max(lo, elems[-2][1])
        for s in range(lo, t_last):
            t_hi = b if k + 1 == N else b - 1
            for t in range(t_last + 1, t_hi + 1):
                yield from rec(elems + [(s, t)])

    if N == 1:
        yield ((a, b),)
        return
    for t1 in range(a + 1, b):
        yield from rec([(a, t1)])


def enumerate_laces(N: int, a: int, b: int) -> list[Lace]:
    """All laces on [a,b] with exactly N edges, in lexicographic order of their elements."""
    if N < 1 or b - a < 1:
        raise ValueError("need N >= 1 and b > a")
    return sorted((Lace(a, b, e) for e in _gen_laces(N, a, b)), key=lambda L: L.elements)


def enumerate_laces_bruteforce(N: int, a: int, b: int) -> list[Lace]:
    """Oracle: filter every N-edge graph for minimal connectivity."""
    out = []
    for es in itertools.combinations(all_edges(a, b), N):
        G = IntervalGraph(a, b, es)
        if is_minimally_connected(G):
            out.append(Lace(a, b, tuple(sorted(es, key=lambda e: (e[1], e[0])))))
    return sorted(out, key=lambda L: L.elements)


@dataclass(frozen=True)
class LaceEntry:
    N: int
    lace_mask: int
    compat_mask: int
    lace: Lace


@lru_cache(maxsize=None)
def lace_table(length: int) -> tuple[LaceEntry, ...]:
    """Every lace on [0, length] with its compatible edge set, as edge bitmasks."""
    entries = []
    N = 1
    while N <= length:
        laces = enumerate_laces(N, 0, length)
        if not laces:
            break
        for L in laces:
            lm = 0
            for s, t in L.elements:
                lm |= edge_bit(s, t)
            cm = 0
            for s, t in compatible_edges(L):
                cm |= edge_bit(s, t)
            entries.append(LaceEntry(N, lm, cm, L))
        N += 1
    return tuple(entries)


def _segment_mask(gamma: Walk, a: int, b: int) -> int:
    """Coincidence mask of gamma restricted to [a,b], with times shifted to start at 0."""
    pts = gamma.points
    mask = 0
    for t in range(a + 1, b + 1):
        for s in range(a, t):
            if pts[s] == pts[t]:
                mask |= edge_bit(s - a, t - a)
    return mask


def _check_interval(gamma: Walk, a: int, b: int) -> None:
    if not 0 <= a <= b <= len(gamma):
        raise ValueError(f"[{a},{b}] is not inside [0,{len(gamma)}]")


def K_of(gamma: Walk, a: int, b: int, beta):
    """prod over a <= s < t <= b of (1 + U_st), U_st = -beta if gamma(s) = gamma(t) else 0."""
    _check_interval(gamma, a, b)
    _check_beta(beta)
    out = 1
    pts = gamma.points
    for t in range(a + 1, b + 1):
        for s in range(a, t):
            if pts[s] == pts[t]:
                out *= 1 - beta
    return out


def _popcount(m: int) -> int:
    return bin(m).count("1")


def _mask_connected(mask: int, length: int) -> bool:
    edges = [(s, t) for t in range(1, length + 1) for s in range(t) if mask & edge_bit(s, t)]
    return bool(edges) and is_connected(IntervalGraph(0, length, edges))


def J_bruteforce(gamma: Walk, a: int, b: int, beta, max_length: int = 6):
    """Sum over connected graphs on [a,b] of prod U_st.

    Only graphs made of coincident pairs contribute, so the sum runs over
    subsets of the coincidence set.
    """
    _check_interval(gamma, a, b)
    _check_beta(beta)
    if b - a > max_length:
        raise IntervalTooLong(f"interval length {b - a} exceeds {max_length} for brute force")
    length = b - a
    coinc = _segment_mask(gamma, a, b)
    bits = [1 << i for i in range(coinc.bit_length()) if coinc >> i & 1]
    total = 0
    for r in range(1, len(bits) + 1):
        for combo in itertools.combinations(bits, r):
            m = sum(combo)
            if _mask_connected(m, length):
                total += (-beta) ** r
    return total


def J_via_laces(gamma: Walk, a: int, b: int, beta, N_cap: int | None = None, flip_sign_N: int | None = None):
    """J[a,b] = sum_N (-1)^N J^(N)[a,b], with J^(N) summed over N-edge laces.

    Returns ``(J, per_N)`` where ``per_N[N]`` is J^(N). ``flip_sign_N`` is a
    deliberate fault for mutation testing: the sign of that J^(N) in the
    alternating sum is reversed.
    """
    _check_interval(gamma, a, b)
    _check_beta(beta)
    per_N = J_terms(_segment_mask(gamma, a, b), b - a, beta)
    if N_cap is not None:
        per_N = {N: v for N, v in per_N.items() if N <= N_cap}
    J = 0
    for N, v in per_N.items():
        sign = (-1) ** N
        if N == flip_sign_N:
            sign = -sign
        J += sign * v
    return J, per_N


def J_polynomial(mask: int, length: int) -> dict[int, dict[int, int]]:
    """J^(N)[0,length] as {N: {k: count}}: J^(N) = beta^N sum_k count (1-beta)^k."""
    out: dict[int, dict[int, int]] = {}
    for e in lace_table(length):
        if e.lace_mask & ~mask:
            continue
        k = _popcount(e.compat_mask & mask)
        row = out.setdefault(e.N, {})
        row[k] = row.get(k, 0) + 1
    return out


def J_terms(mask: int, length: int, beta) -> dict[int, object]:
    """J^(N)[0,length] evaluated at beta, for every N with a contributing lace."""
    out = {}
    for N, row in J_polynomial(mask, length).items():
        out[N] = beta**N * sum(c * (1 - beta) ** k for k, c in row.items())
    return out


@dataclass(frozen=True)
class KJReport:
    ok: bool
    lhs: object
    rhs: object
    walk: Walk


def check_KJ_identity(gamma: Walk, beta, flip_sign_N: int | None = None) -> KJReport:
    """K[0,n] = K[1,n] + sum_{m=2}^n J[0,m] K[m,n], with J from laces."""
    n = len(gamma)
    if n < 1:
        raise ValueError("the identity needs a walk of length >= 1")
    lhs = K_of(gamma, 0, n, beta)
    rhs = K_of(gamma, 1, n, beta)
    for m in range(2, n + 1):
        J, _ = J_via_laces(gamma, 0, m, beta, flip_sign_N=flip_sign_N)
        if J:
            rhs += J * K_of(gamma, m, n, beta)
    return KJReport(lhs == rhs, lhs, rhs, gamma)
