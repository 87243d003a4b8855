"""Weakly self-avoiding walks: weights, exact enumeration of c_n(x), two-point function, susceptibility."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .lattice import LatticeFunction, SeriesFunction, convolve
from .srw import step_kernel


class BudgetExceeded(RuntimeError):
    """The requested enumeration needs more paths than the configured budget."""


DEFAULT_BUDGET = 2 * 10**9
# histogram mode allocates (n_max+1) x cells x (pairs+1) counters
_HIST_LIMIT = 60_000_000


def _check_beta(beta) -> None:
    if not 0 <= beta <= 1:
        raise ValueError(f"beta = {beta} outside [0, 1]")


def unit_vectors(d: int) -> list[tuple[int, ...]]:
    out = []
    for i in range(d):
        for s in (1, -1):
            e = [0] * d
            e[i] = s
            out.append(tuple(e))
    return out


class Walk:
    """Nearest-neighbour path gamma(0..n) starting at the origin."""

    __slots__ = ("points", "visit_counts", "intersection_total", "_mask")

    def __init__(self, points):
        pts = tuple(tuple(int(c) for c in p) for p in points)
        if not pts:
            raise ValueError("a walk has at least one point")
        d = len(pts[0])
        if any(c != 0 for c in pts[0]):
            raise ValueError("walks start at the origin")
        for a, b in zip(pts, pts[1:]):
            if len(b) != d or sum(abs(x - y) for x, y in zip(a, b)) != 1:
                raise ValueError(f"{a} -> {b} is not a nearest-neighbour step")
        visits: dict[tuple[int, ...], int] = {}
        for p in pts:
            visits[p] = visits.get(p, 0) + 1
        self.points = pts
        self.visit_counts = visits
        self.intersection_total = sum(v * (v - 1) // 2 for v in visits.values())
        self._mask = None

    @classmethod
    def from_steps(cls, d: int, steps) -> "Walk":
        """Build from step indices 0..2d-1 (2i is +e_i, 2i+1 is -e_i)."""
        units = unit_vectors(d)
        pos = (0,) * d
        pts = [pos]
        for s in steps:
            pos = tuple(a + b for a, b in zip(pos, units[s]))
            pts.append(pos)
        return cls(pts)

    @property
    def d(self) -> int:
        return len(self.points[0])

    def __len__(self) -> int:
        return len(self.points) - 1

    @property
    def end(self) -> tuple[int, ...]:
        return self.points[-1]

    def coincident(self, s: int, t: int) -> bool:
        return self.points[s] == self.points[t]

    def coincidence_mask(self) -> int:
        """Bit t(t-1)/2 + s is set iff gamma(s) = gamma(t), s < t."""
        if self._mask is None:
            mask = 0
            for t in range(1, len(self.points)):
                base = t * (t - 1) // 2
                pt = self.points[t]
                for s in range(t):
                    if self.points[s] == pt:
                        mask |= 1 << (base + s)
            self._mask = mask
        return self._mask

    def __eq__(self, other):
        return isinstance(other, Walk) and self.points == other.points

    def __hash__(self):
        return hash(self.points)

    def __repr__(self):
        return f"Walk({list(self.points)})"


def edge_bit(s: int, t: int) -> int:
    return 1 << (t * (t - 1) // 2 + s)


def weight(gamma: Walk, beta):
    """(1 - beta)^(number of pairs s < t with gamma(s) = gamma(t))."""
    _check_beta(beta)
    return (1 - beta) ** gamma.intersection_total


def path_count(d: int, n_max: int) -> int:
    return sum((2 * d) ** n for n in range(n_max + 1))


@dataclass
class CnTable:
    """c_n(x) for n <= n_max on the box of radius n_max.

    In polynomial mode ``hist[n, cell, k]`` counts n-step walks to ``cell``
    with k coincident pairs, so c_n(x) = sum_k hist[n, x, k] (1 - beta)^k for
    any beta. In float mode ``weights[n, cell]`` holds c_n at the fixed
    ``beta``.
    """

    d: int
    n_max: int
    beta: float | Fraction | None = None
    hist: np.ndarray | None = field(default=None, repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def radius(self) -> int:
        return self.n_max

    @property
    def polynomial(self) -> bool:
        return self.hist is not None

    def _resolve_beta(self, beta):
        if beta is None:
            beta = self.beta
        if beta is None:
            raise ValueError("this table is beta-polynomial; pass beta")
        _check_beta(beta)
        if not self.polynomial and beta != self.beta:
            raise ValueError(f"float table was built for beta={self.beta}, not {beta}")
        return beta

    def cell_values(self, n: int, beta=None) -> np.ndarray:
        """Flat array of c_n over the box (object array of exact values when beta is rational)."""
        beta = self._resolve_beta(beta)
        if not self.polynomial:
            return self.weights[n]
        h = self.hist[n]
        if isinstance(beta, (int, Fraction)):
            q = 1 - Fraction(beta)
            out = np.empty(h.shape[0], dtype=object)
            out.fill(0)
            kmax = int(np.max(np.nonzero(h.any(axis=0))[0], initial=0))
            for k in range(kmax, -1, -1):
                out = out * q + h[:, k].astype(object)
            return out
        q = 1.0 - float(beta)
        return h.astype(np.float64) @ (q ** np.arange(h.shape[1]))

    def c(self, n: int, beta=None) -> LatticeFunction:
        vals = self.cell_values(n, beta)
        side = 2 * self.n_max + 1
        return LatticeFunction(vals.reshape((side,) * self.d), exact=vals.dtype == object)

    def totals(self, beta=None) -> list:
        out = []
        for n in range(self.n_max + 1):
            v = self.cell_values(n, beta)
            out.append(sum(v.tolist(), 0) if v.dtype == object else float(math.fsum(v)))
        return out

    def series(self, beta) -> SeriesFunction:
        """The generating function sum_n lambda^n c_n as an exact lambda-series."""
        side = 2 * self.n_max + 1
        arr = np.empty((self.n_max + 1,) + (side,) * self.d, dtype=object)
        for n in range(self.n_max + 1):
            vals = self.cell_values(n, beta)
            if vals.dtype != object:
                raise ValueError("series need an exact beta")
            arr[n] = vals.reshape((side,) * self.d)
        return SeriesFunction(arr, self.n_max)


def enumerate_cn(d: int, n_max: int, beta=None, budget: int = DEFAULT_BUDGET, mode: str | None = None) -> CnTable:
    """Enumerate every walk of length <= n_max by depth-first search.

    ``mode`` is ``"polynomial"`` (exact histogram in 1 - beta, reusable for
    every beta) or ``"float"`` (weights at the given float beta; at beta = 1
    subtrees with a coincidence are pruned). The default is polynomial unless
    beta is a float.
    """
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    if beta is not None:
        _check_beta(beta)
    if mode is None:
        mode = "float" if isinstance(beta, float) else "polynomial"
    paths = path_count(d, n_max)
    if paths > budget:
        raise BudgetExceeded(f"{paths} paths for d={d}, n_max={n_max} exceed the budget of {budget}")
    side = 2 * n_max + 1
    cells = side**d
    if mode == "polynomial":
        kmax = n_max * (n_max + 1) // 2
        if (n_max + 1) * cells * (kmax + 1) > _HIST_LIMIT:
            raise BudgetExceeded(f"histogram for d={d}, n_max={n_max} too large; use float mode")
        hist = np.zeros((n_max + 1, cells, kmax + 1), dtype=np.int64)
        _kernels.dfs_histogram(d, n_max, n_max, kmax, hist)
        return CnTable(d, n_max, beta, hist=hist)
    if mode != "float":
        raise ValueError(f"unknown mode {mode!r}")
    if beta is None:
        raise ValueError("float mode needs beta")
    kmax = n_max * (n_max + 1) // 2
    qpow = (1.0 - float(beta)) ** np.arange(kmax + 1, dtype=np.float64)
    weights = np.zeros((n_max + 1, cells))
    _kernels.dfs_weights(d, n_max, n_max, qpow, float(beta) == 1.0, weights)
    return CnTable(d, n_max, float(beta), weights=weights)


@dataclass(frozen=True)
class SawGreen:
    """Truncated G^saw_lambda with a heuristic tail estimate from the growth of sum_x c_n."""

    G: LatticeFunction
    lam: float | Fraction
    n_max: int
    tail_estimate: float


def _growth_ratio(totals) -> float:
    t = [float(v) for v in totals]
    if len(t) < 3 or t[-2] == 0:
        return math.inf
    return t[-1] / t[-2]


def green_saw(d: int, beta, lam, n_max: int, table: CnTable | None = None, R: int | None = None) -> SawGreen:
    """sum_{n <= n_max} lambda^n c_n(x); exact when beta and lambda are rational."""
    if table is None:
        table = enumerate_cn(d, n_max, beta)
    if table.n_max < n_max:
        raise ValueError(f"table only reaches n = {table.n_max}")
    exact = isinstance(lam, (int, Fraction)) and isinstance(beta if beta is not None else table.beta, (int, Fraction))
    side = 2 * table.n_max + 1
    if exact:
        acc = np.empty(side**d, dtype=object)
        acc.fill(0)
        for n in range(n_max, -1, -1):
            acc = acc * lam + table.cell_values(n, beta)
    else:
        acc = np.zeros(side**d)
        for n in range(n_max, -1, -1):
            acc = acc * float(lam) + np.asarray(table.cell_values(n, beta), dtype=np.float64)
    G = LatticeFunction(acc.reshape((side,) * d), exact=exact)
    if R is not None:
        G = G.with_radius(R)
    totals = table.totals(beta)[: n_max + 1]
    rho = _growth_ratio(totals)
    x = float(lam) * rho
    last = float(lam) ** n_max * float(totals[n_max])
    tail = last * x / (1 - x) if x < 1 else math.inf
    return SawGreen(G, lam, n_max, tail)


def green_saw_series(d: int, beta, n_max: int, table: CnTable | None = None) -> SeriesFunction:
    if table is None:
        table = enumerate_cn(d, n_max, beta)
    return table.series(beta)


def susceptibility(d: int, beta, lam, n_max: int, table: CnTable | None = None):
    """chi(lambda) = sum_x G^saw_lambda(x), truncated at n_max."""
    if table is None:
        table = enumerate_cn(d, n_max, beta)
    totals = table.totals(beta)[: n_max + 1]
    acc = 0
    for t in reversed(totals):
        acc = acc * lam + t
    return acc


def estimate_lambda_c(table: CnTable, beta=None) -> float:
    """Ratio-test guess sum c_{n-1} / sum c_n at the largest n. Heuristic, used only to place scan grids."""
    totals = [float(v) for v in table.totals(beta)]
    return totals[-2] / totals[-1]


@dataclass
class SubmultiplicativityRow:
    n: int
    pointwise_ok: bool
    pointwise_slack: Fraction | float
    witness: tuple[int, ...] | None
    summed_ok: bool
    summed_slack: Fraction | float
    literal_ok: bool
    literal_witness: tuple[int, ...] | None


def check_cn_submultiplicativity(table: CnTable, beta=None, n_range=None) -> list[SubmultiplicativityRow]:
    """Check splitting inequalities for c_n, exactly when beta is rational.

    Cutting an n-step walk before each of its n steps gives
    ``n c_n(x) <= sum_m (c_m * D * c_{n-1-m})(x)`` with D the indicator of
    the unit vectors (equality at beta = 0). Summing over x gives
    ``n sum c_n <= 2d sum_m sum c_m sum c_{n-1-m}``. The pointwise form
    without D, ``n c_n(x) <= 2d sum_m (c_m * c_{n-1-m})(x)``, is also
    evaluated; it fails whenever x has the parity of n, since the right side
    only lives on the opposite parity.
    """
    d = table.d
    if n_range is None:
        n_range = range(2, table.n_max + 1)
    cs = [table.c(n, beta) for n in range(table.n_max + 1)]
    exact = cs[0].exact
    D = step_kernel(d, exact) * (2 * d)
    totals = [c.total() for c in cs]
    rows = []
    for n in n_range:
        R = table.n_max
        rhs = LatticeFunction.zeros(d, R, exact)
        rhs_lit = LatticeFunction.zeros(d, R, exact)
        for m in range(n):
            cc = convolve(cs[m].compact(), cs[n - 1 - m].compact(), R)
            rhs_lit = rhs_lit + cc
            rhs = rhs + convolve(cc.compact(), D, R)
        lhs = cs[n] * n
        slack = rhs.values - lhs.with_radius(R).values
        lit = rhs_lit.values * (2 * d) - lhs.with_radius(R).values
        i = int(np.argmin(slack)) if not exact else min(range(slack.size), key=lambda j: slack.flat[j])
        worst = slack.flat[i]
        j = int(np.argmin(lit)) if not exact else min(range(lit.size), key=lambda q: lit.flat[q])
        lit_worst = lit.flat[j]
        to_pt = lambda flat: tuple(int(v) - R for v in np.unravel_index(flat, slack.shape))
        summed_rhs = 2 * d * sum(totals[m] * totals[n - 1 - m] for m in range(n))
        rows.append(
            SubmultiplicativityRow(
                n=n,
                pointwise_ok=worst >= 0,
                pointwise_slack=worst,
                witness=None if worst >= 0 else to_pt(i),
                summed_ok=summed_rhs - n * totals[n] >= 0,
                summed_slack=summed_rhs - n * totals[n],
                literal_ok=lit_worst >= 0,
                literal_witness=None if lit_worst >= 0 else to_pt(j),
            )
        )
    return rows


def bootstrap_ratio(d: int, beta, lam, n_max: int, Grw: LatticeFunction, table: CnTable | None = None):
    """f(lambda) = max over the box of G^saw_lambda(x) / G^rw(x), with the arg-max point."""
    R = Grw.rmax
    G = green_saw(d, beta, lam, n_max, table).G.to_float().with_radius(R)
    ratio = G.values / Grw.to_float().values
    i = int(np.argmax(ratio))
    x = tuple(int(v) - R for v in np.unravel_index(i, ratio.shape))
    return float(ratio.flat[i]), x
