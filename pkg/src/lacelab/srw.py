"""Simple random walk: step kernel, n-step distributions, Green's functions and asymptotic fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import ive
from scipy.stats import binom

from .lattice import LatticeFunction
from .symmetry import orbit_index, orbit_reps

# box cells above which green_rw switches from stencil counts to the orbit recursion
_STENCIL_CELLS = 2_000_000


def step_kernel(d: int, exact: bool = True) -> LatticeFunction:
    """p_1: mass 1/(2d) on each of the 2d unit vectors."""
    w = Fraction(1, 2 * d) if exact else 1.0 / (2 * d)
    pts = {}
    for i in range(d):
        for s in (1, -1):
            e = [0] * d
            e[i] = s
            pts[tuple(e)] = w
    return LatticeFunction.from_points(d, 1, pts, exact)


def _shift_sum(arr: np.ndarray) -> np.ndarray:
    """Sum of the 2d nearest-neighbour translates, on a box one larger."""
    d = arr.ndim
    out = np.zeros(tuple(s + 2 for s in arr.shape), dtype=arr.dtype)
    if arr.dtype == object:
        out.fill(0)
    inner = tuple(slice(1, -1) for _ in range(d))
    for i in range(d):
        for off in (0, 2):
            sl = list(inner)
            sl[i] = slice(off, off + arr.shape[i])
            out[tuple(sl)] += arr
    return out


@lru_cache(maxsize=16)
def walk_counts(d: int, n_max: int) -> tuple[np.ndarray, ...]:
    """Number of n-step nearest-neighbour walks from 0 to x, on the box of radius n, for n <= n_max.

    Arrays are int64 while (2d)^n fits, Python ints beyond.
    """
    counts = [np.ones((1,) * d, dtype=np.int64)]
    for n in range(1, n_max + 1):
        prev = counts[-1]
        if prev.dtype != object and (2 * d) ** n >= 2**62:
            prev = prev.astype(object)
        counts.append(_shift_sum(prev))
    for c in counts:
        c.setflags(write=False)
    return tuple(counts)


def pn(d: int, n: int, exact: bool = True) -> LatticeFunction:
    """n-step transition probabilities p_n(x), on the box of radius n."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    w = walk_counts(d, n)[n]
    if exact:
        denom = (2 * d) ** n
        vals = np.vectorize(lambda c: Fraction(int(c), denom) if c else 0, otypes=[object])(w)
        return LatticeFunction(vals, True)
    return LatticeFunction(w.astype(np.float64) / float(2 * d) ** n, False)


@dataclass(frozen=True)
class SrwTable:
    """p_0..p_{n_max} in dimension d, together with the fugacity they are used at."""

    d: int
    n_max: int
    mu: float | Fraction = 0
    exact: bool = True
    p: tuple[LatticeFunction, ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(pn(self.d, n, self.exact) for n in range(self.n_max + 1)))


def pn_at_points(d: int, n_max: int, points) -> np.ndarray:
    """Float p_n(x) for n = 0..n_max at each given point, shape (n_max+1, len(points)).

    Uses the coordinate decomposition: a walk in j dimensions spends a
    binomial(n, 1/j) number of its steps in the first coordinate, and the
    1-d probabilities are binomial(k, 1/2). Suffixes of the sorted absolute
    coordinates are shared between points.
    """
    pts = [tuple(sorted(abs(int(c)) for c in p)) for p in points]
    n = np.arange(n_max + 1)
    amax = max((max(p) for p in pts), default=0)
    # one_d[a, k] = P(1-d walk at +-a after k steps)
    a = np.arange(amax + 1)[:, None]
    k = n[None, :]
    with np.errstate(invalid="ignore"):
        one_d = np.where((k + a) % 2 == 0, binom.pmf((k + a) // 2, k, 0.5), 0.0)
    one_d = np.nan_to_num(one_d)
    # level j holds j-dimensional suffixes
    keys_prev = [()]
    vals_prev = np.where(n == 0, 1.0, 0.0)[None, :]
    results = {}
    for j in range(1, d + 1):
        suffixes = sorted({p[d - j :] for p in pts})
        first = np.array([s[0] for s in suffixes], dtype=np.int64)
        lookup = {s: i for i, s in enumerate(keys_prev)}
        rest_idx = np.array([lookup[s[1:]] for s in suffixes], dtype=np.int64)
        vals = np.zeros((len(suffixes), n_max + 1))
        if j == 1:
            vals[:] = one_d[first]
        else:
            f1 = one_d[first]
            rest = vals_prev[rest_idx]
            for m in range(n_max + 1):
                row = binom.pmf(np.arange(m + 1), m, 1.0 / j)
                vals[:, m] = (f1[:, : m + 1] * rest[:, m::-1]) @ row
        keys_prev, vals_prev = suffixes, vals
        if j == d:
            results = {s: vals[i] for i, s in enumerate(suffixes)}
    return np.stack([results[p] for p in pts], axis=1) if pts else np.zeros((n_max + 1, 0))


@dataclass(frozen=True)
class GreenSeries:
    """Truncated random-walk Green's function and a bound on what was dropped.

    ``tail`` bounds sup_x of the omitted terms. It is rigorous for
    |2d mu| < 1; at |2d mu| = 1 it is an estimate from the fitted decay
    p_n(0) <= C n^{-d/2}.
    """

    G: LatticeFunction
    mu: float | Fraction
    n_max: int
    tail: float
    tail_rigorous: bool


def _check_mu(mu, d: int, truncated: bool = False) -> float:
    z = 2 * d * mu
    if abs(z) > 1:
        raise ValueError(f"|2d mu| = {abs(float(z)):.6g} exceeds 1")
    if abs(z) == 1 and d <= 2 and not truncated:
        raise ValueError("the critical Green's function diverges for d <= 2")
    return float(z)


def green_rw(mu, d: int, n_max: int, R: int, exact: bool | None = None) -> GreenSeries:
    """sum_{n <= n_max} (2d mu)^n p_n(x) on the box of radius R.

    At |2d mu| = 1 in d <= 2 the partial sums are finite but unbounded in
    n_max, and ``tail`` is infinite.
    """
    z = _check_mu(mu, d, truncated=True)
    if exact is None:
        exact = isinstance(mu, (int, Fraction))
    r_eval = min(n_max, R)
    if exact or (2 * n_max + 1) ** d <= _STENCIL_CELLS:
        counts = walk_counts(d, n_max)
        m = Fraction(mu) if exact else float(mu)
        acc = np.zeros((2 * r_eval + 1,) * d, dtype=object if exact else np.float64)
        if exact:
            acc.fill(0)
        for n in range(n_max, -1, -1):
            c = counts[n]
            rn = n
            if rn > r_eval:
                sl = tuple(slice(rn - r_eval, rn + r_eval + 1) for _ in range(d))
                c = c[sl]
                rn = r_eval
            acc = acc * m
            inner = tuple(slice(r_eval - rn, r_eval + rn + 1) for _ in range(d))
            acc[inner] += c if exact else c.astype(np.float64)
        G = LatticeFunction(acc, exact).with_radius(R)
    else:
        reps = orbit_reps(d, r_eval)
        p = pn_at_points(d, n_max, reps)
        zn = z ** np.arange(n_max + 1)
        vals = zn @ p
        G = LatticeFunction(vals[orbit_index(d, r_eval)].reshape((2 * r_eval + 1,) * d), False).with_radius(R)
    G.trunc = 0.0
    if abs(z) < 1:
        tail = abs(z) ** (n_max + 1) / (1 - abs(z))
        rigorous = True
    elif d <= 2:
        tail = math.inf
        rigorous = False
    else:
        p0 = pn_at_points(d, n_max, [(0,) * d])[:, 0]
        even = np.arange(2, n_max + 1, 2)
        C = float(np.max(p0[even] * even ** (d / 2))) if len(even) else 1.0
        # sum_{n > n_max} C n^{-d/2} <= C n_max^{1-d/2} / (d/2 - 1)
        tail = C * max(n_max, 1) ** (1 - d / 2) / (d / 2 - 1)
        rigorous = False
    return GreenSeries(G, mu, n_max, tail, rigorous)


def _ive_table(kmax: int, s: np.ndarray) -> np.ndarray:
    """ive(k, s) for k = 0..kmax; large arguments use the Hankel expansion (scipy returns nan there)."""
    k = np.arange(kmax + 1)[:, None]
    s = np.asarray(s, dtype=np.float64)[None, :]
    out = np.empty((kmax + 1, s.shape[1]))
    big = s[0] >= 1e6
    out[:, ~big] = ive(k, s[:, ~big])
    sb = s[:, big]
    m = 4.0 * k * k
    e = 8.0 * sb
    out[:, big] = (1 - (m - 1) / e + (m - 1) * (m - 9) / (2 * e**2) - (m - 1) * (m - 9) * (m - 25) / (6 * e**3)) / np.sqrt(2 * np.pi * sb)
    return out


def green_at_points(mu: float, d: int, points, step: float = 0.1) -> np.ndarray:
    """Random-walk Green's function at the given points via the continuous-time representation.

    G_mu(x) = int_0^inf e^{-t} prod_i I_{x_i}(z t / d) dt with z = 2d mu, since
    the number of jumps of a rate-1 walk by time t is Poisson(t). The
    integral is done by the trapezoid rule in log t, which converges
    geometrically for this smooth, doubly decaying integrand.
    """
    z = _check_mu(mu, d)
    pts = np.abs(np.asarray(points, dtype=np.int64).reshape(-1, d))
    u = np.arange(-40.0, 80.0 + step / 2, step)
    t = np.exp(u)
    az = abs(z)
    tab = _ive_table(int(pts.max(initial=0)), az * t / d)
    damp = np.exp(-(1 - az) * t) * t * step
    out = np.empty(len(pts))
    for i, p in enumerate(pts):
        prod = damp.copy()
        for c in p:
            prod *= tab[c]
        val = math.fsum(prod)
        out[i] = -val if (z < 0 and int(p.sum()) % 2) else val
    return out


def green_function(mu: float, d: int, R: int, step: float = 0.1) -> LatticeFunction:
    """Float G^rw_mu on the box of radius R (all orbits evaluated once)."""
    reps = orbit_reps(d, R)
    vals = green_at_points(mu, d, reps, step)
    return LatticeFunction(vals[orbit_index(d, R)].reshape((2 * R + 1,) * d), False)


def critical_green(d: int, R: int) -> LatticeFunction:
    return green_function(1.0 / (2 * d), d, R)


@lru_cache(maxsize=8)
def _norm_table(d: int, R: int) -> np.ndarray:
    ax = np.arange(-R, R + 1, dtype=np.float64) ** 2
    sq = np.zeros((2 * R + 1,) * d)
    for i in range(d):
        shape = [1] * d
        shape[i] = -1
        sq = sq + ax.reshape(shape)
    return np.sqrt(sq)


def radii(d: int, R: int) -> np.ndarray:
    """Euclidean |x| on the box of radius R."""
    return _norm_table(d, R)


@dataclass(frozen=True)
class EdgeworthFit:
    """Least-squares fit G(x) ~ a|x|^{2-d} + b|x|^{-d} on a radial window.

    ``rms_rel_residual`` is the root mean square of (G - fit)/G over all
    lattice points of the window, the quantity the fit minimises.
    ``max_rel_residual`` is the worst single point; it is dominated by the
    cubic anisotropy of the lattice, which no radial model captures.
    """

    a: float
    b: float
    rms_rel_residual: float
    max_rel_residual: float
    scaled_residual: np.ndarray
    radius: np.ndarray
    n_points: int

    @property
    def scaled_spread(self) -> float:
        """max over median of |residual| |x|^{d+2}."""
        med = float(np.median(np.abs(self.scaled_residual)))
        return float(np.max(np.abs(self.scaled_residual))) / med if med > 0 else math.inf


def _orbit_sizes(reps: np.ndarray) -> np.ndarray:
    d = reps.shape[1]
    sizes = np.empty(len(reps), dtype=np.int64)
    for i, p in enumerate(reps):
        _, mult = np.unique(p, return_counts=True)
        perms = math.factorial(d) // math.prod(math.factorial(int(m)) for m in mult)
        sizes[i] = perms * 2 ** int(np.count_nonzero(p))
    return sizes


def edgeworth_fit(G: LatticeFunction, window=(4.0, 8.0)) -> EdgeworthFit:
    """Relative-weighted least squares of a|x|^{2-d} + b|x|^{-d} on lo <= |x| <= hi.

    Every lattice point in the window counts once; values are read at orbit
    representatives and weighted by orbit size.
    """
    d = G.d
    lo, hi = window
    if G.rmax < hi:
        raise ValueError(f"box radius {G.rmax} does not cover |x| <= {hi}")
    reps = orbit_reps(d, int(math.floor(hi)))
    r = np.sqrt((reps.astype(np.float64) ** 2).sum(axis=1))
    keep = (r >= lo) & (r <= hi)
    sizes = _orbit_sizes(reps[keep]).astype(np.float64)
    n_points = int(sizes.sum())
    if n_points < 10:
        raise ValueError(f"window {window} holds only {n_points} lattice points; need at least 10")
    rv = r[keep]
    Gf = G.to_float()
    g = np.array([Gf[tuple(p)] for p in reps[keep]])
    X = np.stack([rv ** (2 - d), rv ** (-d)], axis=1)
    wts = np.sqrt(sizes) / np.abs(g)
    coef, *_ = np.linalg.lstsq(X * wts[:, None], g * wts, rcond=None)
    resid = g - X @ coef
    rel = resid / g
    return EdgeworthFit(
        a=float(coef[0]),
        b=float(coef[1]),
        rms_rel_residual=float(np.sqrt(np.sum(sizes * rel**2) / sizes.sum())),
        max_rel_residual=float(np.max(np.abs(rel))),
        scaled_residual=resid * rv ** (d + 2),
        radius=rv,
        n_points=n_points,
    )


def gaussian_bound_fit(d: int, n_max: int) -> tuple[float, float]:
    """Constants C, c with p_n(x) <= C n^{-d/2} exp(-c|x|^2/n) on every computed (n, x), n >= 1.

    c is taken as large as the data allow for the C fixed by the origin,
    scanning a grid; returns (C, c).
    """
    counts = walk_counts(d, n_max)
    C = 0.0
    rows = []
    for n in range(1, n_max + 1):
        p = counts[n].astype(np.float64) / float(2 * d) ** n
        x2 = radii(d, n) ** 2
        mask = p > 0
        C = max(C, float(np.max(p[mask] * n ** (d / 2))))
        rows.append((n, p[mask], x2[mask]))
    C *= 1.0 + 1e-12
    best = 0.0
    for c in np.linspace(0.0, 2.0, 401)[1:]:
        if all(np.all(pv <= C * n ** (-d / 2) * np.exp(-c * x2 / n)) for n, pv, x2 in rows):
            best = float(c)
        else:
            break
    return C, best
