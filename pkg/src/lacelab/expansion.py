"""Expansion coefficients Pi^(N), the kernel Delta^saw, and the diagrammatic bounds behind them.

One depth-first pass over all walks of length <= n_max fills both the
c_n histogram and, per N, the histogram of J^(N)[0,n] contributions. Both
are stored as integer counts by power of q = 1 - beta, so a single
enumeration serves every beta exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import _kernels
from .lace import J_polynomial
from .lattice import LatticeFunction, SeriesFunction, banach_norm, convolve, delta_rw, series_convolve
from .symmetry import orbit_index, orbit_reps
from .walks import BudgetExceeded, DEFAULT_BUDGET, _check_beta, path_count, unit_vectors


@dataclass
class ExpansionTable:
    """Integer histograms from one walk enumeration.

    ``c_hist[(n, x)][k]`` counts n-step walks ending at x with k coincident
    pairs; ``pi_hist[N][(n, x)][k]`` counts (walk, N-edge lace) pairs with
    k compatible coincident edges, so that
    Pi^(N)_n(x) = beta^N sum_k count (1 - beta)^k.
    """

    d: int
    n_max: int
    c_hist: dict
    pi_hist: dict
    walks: int

    @property
    def N_values(self) -> list[int]:
        return sorted(self.pi_hist)

    def _coeff_array(self, hist: dict, beta, prefactor) -> np.ndarray:
        side = 2 * self.n_max + 1
        arr = np.empty((self.n_max + 1,) + (side,) * self.d, dtype=object)
        arr.fill(0)
        exact = isinstance(beta, (int, Fraction))
        q = 1 - (Fraction(beta) if exact else beta)
        for (n, x), row in hist.items():
            val = prefactor * sum(c * q**k for k, c in row.items())
            arr[(n,) + tuple(c + self.n_max for c in x)] = val
        if not exact:
            arr = arr.astype(np.float64)
        return arr

    def c_series(self, beta) -> SeriesFunction:
        _check_beta(beta)
        return SeriesFunction(self._coeff_array(self.c_hist, beta, 1), self.n_max)

    def pi_series(self, N: int, beta) -> SeriesFunction:
        """Pi^(N) as an exact lambda-series (zero when no N-edge lace fits in n_max steps)."""
        _check_beta(beta)
        if N not in self.pi_hist:
            return SeriesFunction.zeros(self.d, self.n_max)
        b = Fraction(beta) if isinstance(beta, (int, Fraction)) else beta
        return SeriesFunction(self._coeff_array(self.pi_hist[N], beta, b**N), self.n_max)

    def pi_coefficients(self, N: int, beta) -> np.ndarray:
        """Float or exact coefficient array (degree, box...) for Pi^(N)."""
        _check_beta(beta)
        if N not in self.pi_hist:
            return self._coeff_array({}, beta, 0)
        return self._coeff_array(self.pi_hist[N], beta, beta**N)


def enumerate_expansion(d: int, n_max: int, budget: int = DEFAULT_BUDGET) -> ExpansionTable:
    """Walk every path of length <= n_max once, recording c_n and J^(N) histograms."""
    paths = path_count(d, n_max)
    if paths > budget:
        raise BudgetExceeded(f"{paths} paths for d={d}, n_max={n_max} exceed the budget of {budget}")
    units = unit_vectors(d)
    c_hist: dict = {}
    pi_hist: dict = {}
    memo: dict = {}
    origin = (0,) * d
    pts = [origin]
    times: dict = {origin: [0]}
    masks = [0]

    def record(n: int, x, mask: int):
        k = mask.bit_count() if hasattr(mask, "bit_count") else bin(mask).count("1")
        row = c_hist.setdefault((n, x), {})
        row[k] = row.get(k, 0) + 1
        # J^(N)[0,n] needs gamma(0) revisited and gamma(n) a revisit
        if n < 2 or not (mask >> (n * (n - 1) // 2)) or len(times[origin]) < 2:
            return
        key = (n, mask)
        poly = memo.get(key)
        if poly is None:
            poly = J_polynomial(mask, n)
            memo[key] = poly
        for N, krow in poly.items():
            target = pi_hist.setdefault(N, {}).setdefault((n, x), {})
            for kk, c in krow.items():
                target[kk] = target.get(kk, 0) + c

    def dfs(n: int):
        x = pts[-1]
        record(n, x, masks[-1])
        if n == n_max:
            return
        t = n + 1
        base = t * (t - 1) // 2
        for e in units:
            y = tuple(a + b for a, b in zip(x, e))
            earlier = times.get(y)
            m = masks[-1]
            if earlier:
                for s in earlier:
                    m |= 1 << (base + s)
                earlier.append(t)
            else:
                times[y] = [t]
            pts.append(y)
            masks.append(m)
            dfs(t)
            masks.pop()
            pts.pop()
            lst = times[y]
            lst.pop()
            if not lst:
                del times[y]

    dfs(0)
    return ExpansionTable(d, n_max, c_hist, pi_hist, paths)


@lru_cache(maxsize=8)
def _cached_table(d: int, n_max: int) -> ExpansionTable:
    return enumerate_expansion(d, n_max)


def expansion_table(d: int, n_max: int, budget: int = DEFAULT_BUDGET) -> ExpansionTable:
    if path_count(d, n_max) > budget:
        raise BudgetExceeded(f"{path_count(d, n_max)} paths for d={d}, n_max={n_max} exceed the budget of {budget}")
    return _cached_table(d, n_max)


def pi_N_series(d: int, beta, N: int, n_max: int, table: ExpansionTable | None = None) -> SeriesFunction:
    table = table or expansion_table(d, n_max)
    return table.pi_series(N, beta)


def pi_N(d: int, beta, lam, N: int, n_max: int, table: ExpansionTable | None = None) -> LatticeFunction:
    """Pi^(N)(x) = sum over walks to x of lambda^len J^(N)[0,len], truncated at n_max."""
    return pi_N_series(d, beta, N, n_max, table).evaluate(lam)


def lace_series(d: int, beta, n_max: int, N_cap: int | None = None, table: ExpansionTable | None = None) -> SeriesFunction:
    """Pi = sum_{N <= N_cap} (-1)^N Pi^(N) as a lambda-series."""
    table = table or expansion_table(d, n_max)
    out = SeriesFunction.zeros(d, n_max)
    for N in table.N_values:
        if N_cap is not None and N > N_cap:
            continue
        term = table.pi_series(N, beta)
        out = out + term if N % 2 == 0 else out - term
    return out


def _neighbour_series(d: int, n_max: int) -> SeriesFunction:
    arr = SeriesFunction.zeros(d, n_max).coeffs.copy()
    if n_max >= 1:
        for e in unit_vectors(d):
            arr[(1,) + tuple(c + n_max for c in e)] = 1
    return SeriesFunction(arr, n_max)


def delta_saw_series(d: int, beta, N_cap: int, n_max: int, table: ExpansionTable | None = None) -> SeriesFunction:
    """Delta^saw = delta_0 - lambda * (unit-vector indicator) - Pi, as a lambda-series."""
    return SeriesFunction.delta(d, n_max) - _neighbour_series(d, n_max) - lace_series(d, beta, n_max, N_cap, table)


def fixed_point_defect(d: int, beta, n_max: int, N_cap: int, table: ExpansionTable | None = None) -> SeriesFunction:
    """G^saw * Delta^saw - delta_0 as an exact series; identically zero when the expansion is right."""
    table = table or expansion_table(d, n_max)
    G = table.c_series(beta)
    D = delta_saw_series(d, beta, N_cap, n_max, table)
    return series_convolve(G, D) - SeriesFunction.delta(d, n_max)


@dataclass(frozen=True)
class DeltaSaw:
    Delta: LatticeFunction
    per_N_norm: dict
    tail_estimate: float


def delta_saw(d: int, beta, lam, N_cap: int, n_max: int, table: ExpansionTable | None = None) -> DeltaSaw:
    """Delta^saw at fixed lambda, with the norm of each Pi^(N) and an alternating-tail estimate.

    The estimate is the norm of the last Pi^(N) kept when further N would
    contribute at this n_max, and zero when N_cap already covers every N.
    """
    table = table or expansion_table(d, n_max)
    exact = isinstance(lam, (int, Fraction)) and isinstance(beta, (int, Fraction))
    Delta = delta_rw(lam, d, n_max, exact=exact)
    norms = {}
    for N in table.N_values:
        term = table.pi_series(N, beta).evaluate(lam)
        norms[N] = banach_norm(term)
        if N > N_cap:
            continue
        Delta = Delta - term if N % 2 == 0 else Delta + term
    dropped = [N for N in table.N_values if N > N_cap]
    tail = norms.get(N_cap, 0.0) if dropped else 0.0
    return DeltaSaw(Delta, norms, tail)


# diagrammatic bounds


def _power_table(d: int, max_sq: int, exponent: float) -> np.ndarray:
    """|w|^exponent indexed by |w|^2, with the value at 0 set to 1."""
    s = np.arange(max_sq + 1, dtype=np.float64)
    out = np.ones_like(s)
    out[1:] = s[1:] ** (exponent / 2.0)
    return out


def triple_sum(d: int, u, v, R: int) -> float:
    """sum over |w|_inf <= R of |w|^{4-2d} |w-u|^{2-d} |w-v|^{2-d} (|0|^a read as 1)."""
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    reach = R + int(max(np.abs(u).max(initial=0), np.abs(v).max(initial=0)))
    max_sq = d * reach * reach
    ta = _power_table(d, max_sq, 4 - 2 * d)
    tb = _power_table(d, max_sq, 2 - d)
    return float(_kernels.triple_power_sum(d, R, u, v, ta, tb))


def _pow0(x, a: float) -> float:
    r = math.sqrt(sum(c * c for c in x))
    return 1.0 if r == 0 else r**a


def triple_sum_check(d: int, u, v, R: int) -> float:
    """triple_sum / (|u|^{2-d} |v|^{2-d}); bounded in u, v when d > 4."""
    return triple_sum(d, u, v, R) / (_pow0(u, 2 - d) * _pow0(v, 2 - d))


def triple_grid(d: int, radius: float = 6.0) -> list[tuple[int, ...]]:
    """0 and multiples of e1, -e1, e2, e1+e2 with Euclidean length <= radius."""
    dirs = []
    for vec in ([1], [-1], [0, 1], [1, 1]):
        dirs.append(tuple(vec + [0] * (d - len(vec))))
    pts = [(0,) * d]
    for e in dirs:
        k = 1
        while math.sqrt(sum((k * c) ** 2 for c in e)) <= radius + 1e-12:
            pts.append(tuple(k * c for c in e))
            k += 1
    return pts


@dataclass(frozen=True)
class TripleScan:
    """Ratios on the (u, v) grid at two box radii."""

    pairs: list
    ratio_small: np.ndarray
    ratio_large: np.ndarray
    R_small: int
    R_large: int

    @property
    def sup(self) -> float:
        return float(np.max(self.ratio_large))

    @property
    def max_rel_change(self) -> float:
        return float(np.max(np.abs(self.ratio_large / self.ratio_small - 1)))


def triple_sum_scan(d: int, R_small: int = 12, R_large: int = 16, radius: float = 6.0) -> TripleScan:
    if d <= 4:
        raise ValueError("the triple sum is only expected to be bounded for d > 4")
    grid = triple_grid(d, radius)
    pairs = [(u, v) for i, u in enumerate(grid) for v in grid[i:]]
    small = np.array([triple_sum_check(d, u, v, R_small) for u, v in pairs])
    large = np.array([triple_sum_check(d, u, v, R_large) for u, v in pairs])
    return TripleScan(pairs, small, large, R_small, R_large)


def _radial_power(d: int, R: int, exponent: float) -> LatticeFunction:
    reps = orbit_reps(d, R)
    r = np.sqrt((reps.astype(np.float64) ** 2).sum(axis=1))
    vals = np.ones_like(r)
    vals[r > 0] = r[r > 0] ** exponent
    return LatticeFunction(vals[orbit_index(d, R)].reshape((2 * R + 1,) * d), False)


@dataclass(frozen=True)
class ABound:
    """A^(N) on the box together with how it was obtained.

    ``exact`` is true when the diagram sum itself was evaluated (truncated to
    the box); otherwise ``A`` is the induction majorant C^{N-3} A^(3) with C
    the measured triple-sum constant.
    """

    N: int
    A: LatticeFunction
    exact: bool
    constant: float | None


def A_N_bound(d: int, N: int, R: int, triple_constant: float | None = None) -> ABound:
    """Diagram bound A^(N).

    A^(2)(x) = |x|^{6-3d}; A^(3)(x) = |x|^{2-d} (B*B)(x) with B = |.|^{4-2d},
    summed over the box. For N >= 4 the chain sums are not evaluated
    directly; each induction step multiplies by the triple-sum constant.
    """
    if d <= 4:
        raise ValueError(f"d = {d}: the induction is not expected to contract for d <= 4")
    if N < 2:
        raise ValueError("A^(N) is defined for N >= 2")
    if N == 2:
        return ABound(2, _radial_power(d, R, 6 - 3 * d), True, None)
    B = _radial_power(d, R, 4 - 2 * d)
    A3 = convolve(B, B, R)
    A3 = LatticeFunction(A3.values * _radial_power(d, R, 2 - d).values, False, A3.trunc)
    if N == 3:
        return ABound(3, A3, True, None)
    if triple_constant is None:
        triple_constant = triple_sum_scan(d, R, R).sup
    return ABound(N, A3 * triple_constant ** (N - 3), False, triple_constant)


def fit_A_constant(d: int, R: int, N_max: int = 5, triple_constant: float | None = None) -> tuple[float, dict]:
    """Smallest C with A^(N) <= C^N |x|^{6-3d} on the box for 2 <= N <= N_max.

    Returns (C, {N: max_x A^(N)(x) / |x|^{6-3d}}). In log scale this is the
    least slope through the origin lying above every point (N, log ratio_N).
    """
    base = _radial_power(d, R, 6 - 3 * d).values
    ratios = {}
    for N in range(2, N_max + 1):
        A = A_N_bound(d, N, R, triple_constant).A
        ratios[N] = float(np.max(A.values / base))
    C = max(math.exp(math.log(max(r, 1e-300)) / N) for N, r in ratios.items())
    return C, ratios
