"""Lattice functions on Z^d, their convolution, the weighted norm and Neumann inversion.

A :class:`LatticeFunction` stores its values on the centred box
``{x : |x|_inf <= rmax}`` as a dense numpy array whose index ``i`` along each
axis corresponds to coordinate ``i - rmax``. Float functions use float64;
exact functions use an object array holding ``int`` or ``Fraction`` values.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np

from . import _kernels
from .symmetry import orbit_index, orbit_reps, symmetry_defect


class DimensionMismatch(ValueError):
    pass


class ModeMismatch(ValueError):
    pass


class NotInvertibleError(ValueError):
    """Raised when ``||f - delta_0||`` is too large for the Neumann series to be guaranteed."""


class ConvergenceError(RuntimeError):
    pass


def _as_exact(v):
    if isinstance(v, (int, Fraction)):
        return v
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, float):
        return Fraction(v)
    return v


class LatticeFunction:
    """Immutable function on Z^d with support inside an l-infinity box.

    Parameters
    ----------
    values : ndarray
        Centred array of shape ``(2*rmax+1,)*d``.
    exact : bool
        Exact (object array of rationals) or float64 storage.
    trunc : float
        Upper bound on the l1 distance to the untruncated function this one
        approximates. Zero for functions built directly.
    """

    def __init__(self, values: np.ndarray, exact: bool | None = None, trunc: float = 0.0):
        values = np.asarray(values)
        if values.ndim == 0:
            raise ValueError("need at least one dimension")
        side = values.shape[0]
        if side % 2 != 1 or any(s != side for s in values.shape):
            raise ValueError(f"values must be a centred cube with odd side, got shape {values.shape}")
        if exact is None:
            exact = values.dtype == object
        if exact:
            if values.dtype != object:
                values = values.astype(object)
                values = np.vectorize(_as_exact, otypes=[object])(values) if values.size else values
        else:
            values = np.asarray(values, dtype=np.float64)
        values = values.copy()
        values.setflags(write=False)
        self._values = values
        self.exact = bool(exact)
        self.trunc = float(trunc)

    # construction helpers

    @classmethod
    def zeros(cls, d: int, rmax: int, exact: bool = False) -> "LatticeFunction":
        shape = (2 * rmax + 1,) * d
        if exact:
            arr = np.empty(shape, dtype=object)
            arr.fill(0)
        else:
            arr = np.zeros(shape)
        return cls(arr, exact)

    @classmethod
    def delta(cls, d: int, rmax: int = 0, exact: bool = False, scale=1) -> "LatticeFunction":
        return cls.from_points(d, rmax, {(0,) * d: scale}, exact)

    @classmethod
    def from_points(cls, d: int, rmax: int, points: dict, exact: bool = False) -> "LatticeFunction":
        """Build from a mapping point -> value; every point must lie in the box."""
        shape = (2 * rmax + 1,) * d
        if exact:
            arr = np.empty(shape, dtype=object)
            arr.fill(0)
        else:
            arr = np.zeros(shape)
        for x, v in points.items():
            if len(x) != d:
                raise DimensionMismatch(f"point {x} is not in Z^{d}")
            if max(abs(c) for c in x) > rmax:
                raise ValueError(f"point {x} lies outside the box of radius {rmax}")
            arr[tuple(c + rmax for c in x)] += _as_exact(v) if exact else float(v)
        return cls(arr, exact)

    @classmethod
    def from_function(cls, d: int, rmax: int, fn, exact: bool = False) -> "LatticeFunction":
        pts = {x: fn(x) for x in itertools.product(range(-rmax, rmax + 1), repeat=d)}
        return cls.from_points(d, rmax, pts, exact)

    # basic properties

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def d(self) -> int:
        return self._values.ndim

    @property
    def rmax(self) -> int:
        return (self._values.shape[0] - 1) // 2

    def __getitem__(self, x) -> float | Fraction:
        r = self.rmax
        if len(x) != self.d:
            raise DimensionMismatch(f"point {x} is not in Z^{self.d}")
        if max(abs(c) for c in x) > r:
            return 0 if self.exact else 0.0
        return self._values[tuple(c + r for c in x)]

    def items(self):
        """Nonzero (point, value) pairs in lexicographic order."""
        r = self.rmax
        for idx in zip(*np.nonzero(self._nonzero_mask())):
            yield tuple(int(i) - r for i in idx), self._values[idx]

    def _nonzero_mask(self) -> np.ndarray:
        if self.exact:
            return np.vectorize(lambda v: v != 0, otypes=[bool])(self._values) if self._values.size else np.zeros(self._values.shape, bool)
        return self._values != 0

    @cached_property
    def nnz(self) -> int:
        return int(np.count_nonzero(self._nonzero_mask()))

    @cached_property
    def support_radius(self) -> int:
        """Smallest r with the support inside the box of radius r (-1 for the zero function)."""
        mask = self._nonzero_mask()
        if not mask.any():
            return -1
        r = self.rmax
        radius = 0
        for ax in range(self.d):
            other = tuple(a for a in range(self.d) if a != ax)
            hit = np.nonzero(mask.any(axis=other) if other else mask)[0]
            radius = max(radius, int(abs(hit[0] - r)), int(abs(hit[-1] - r)))
        return radius

    @cached_property
    def symmetric(self) -> bool:
        """Exact invariance under coordinate permutations and sign flips."""
        return symmetry_defect(self._values) == 0

    def total(self):
        """Sum of all values."""
        if self.exact:
            return sum(self._values.ravel().tolist(), 0)
        return float(math.fsum(self._values.ravel()))

    def l1(self) -> float:
        if self.exact:
            return sum((abs(v) for v in self._values.ravel().tolist()), 0)
        return float(math.fsum(np.abs(self._values).ravel()))

    def sup(self):
        if self._values.size == 0:
            return 0
        if self.exact:
            return max(abs(v) for v in self._values.ravel().tolist())
        return float(np.max(np.abs(self._values)))

    # reshaping

    def with_radius(self, rmax: int) -> "LatticeFunction":
        """Embed into a larger box or clip to a smaller one (clipped mass joins ``trunc``)."""
        r = self.rmax
        if rmax == r:
            return self
        if rmax > r:
            out = LatticeFunction.zeros(self.d, rmax, self.exact)._values.copy()
            sl = tuple(slice(rmax - r, rmax + r + 1) for _ in range(self.d))
            out[sl] = self._values
            return LatticeFunction(out, self.exact, self.trunc)
        sl = tuple(slice(r - rmax, r + rmax + 1) for _ in range(self.d))
        kept = LatticeFunction(self._values[sl], self.exact)
        lost = float(self.l1()) - float(kept.l1())
        kept.trunc = self.trunc + max(lost, 0.0)
        return kept

    def compact(self) -> "LatticeFunction":
        """Shrink the box to the support radius (at least 0)."""
        return self.with_radius(max(self.support_radius, 0))

    def to_float(self) -> "LatticeFunction":
        if not self.exact:
            return self
        arr = np.vectorize(float, otypes=[np.float64])(self._values) if self._values.size else np.zeros(self._values.shape)
        return LatticeFunction(arr, False, self.trunc)

    def map(self, fn) -> "LatticeFunction":
        """Apply a scalar function entrywise (exact mode) or vectorised (float mode)."""
        if self.exact:
            arr = np.vectorize(fn, otypes=[object])(self._values)
        else:
            arr = fn(self._values)
        return LatticeFunction(arr, self.exact, self.trunc)

    # arithmetic

    def _align(self, other: "LatticeFunction"):
        if not isinstance(other, LatticeFunction):
            raise TypeError(f"expected LatticeFunction, got {type(other).__name__}")
        if other.d != self.d:
            raise DimensionMismatch(f"dimension {self.d} vs {other.d}")
        if other.exact != self.exact:
            raise ModeMismatch("cannot mix exact and float lattice functions")
        r = max(self.rmax, other.rmax)
        return self.with_radius(r), other.with_radius(r)

    def __add__(self, other):
        a, b = self._align(other)
        return LatticeFunction(a._values + b._values, self.exact, a.trunc + b.trunc)

    def __sub__(self, other):
        a, b = self._align(other)
        return LatticeFunction(a._values - b._values, self.exact, a.trunc + b.trunc)

    def __neg__(self):
        return LatticeFunction(-self._values, self.exact, self.trunc)

    def __mul__(self, scalar):
        if isinstance(scalar, LatticeFunction):
            raise TypeError("use convolve() for the lattice product")
        s = _as_exact(scalar) if self.exact else float(scalar)
        return LatticeFunction(self._values * s, self.exact, self.trunc * abs(float(s)))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, LatticeFunction) or other.d != self.d or other.exact != self.exact:
            return NotImplemented
        a, b = self._align(other)
        return bool(np.all(a._values == b._values))

    __hash__ = None

    def allclose(self, other: "LatticeFunction", atol: float = 1e-12, rtol: float = 0.0) -> bool:
        a, b = self.to_float(), other.to_float()
        a, b = a._align(b)
        return bool(np.allclose(a._values, b._values, atol=atol, rtol=rtol))

    def __repr__(self):
        mode = "exact" if self.exact else "float"
        return f"LatticeFunction(d={self.d}, rmax={self.rmax}, {mode}, nnz={self.nnz}, trunc={self.trunc:.3g})"


# convolution


def _shift_slices(y, rb, rout):
    """Slices placing a box of radius ``rb`` shifted by ``y`` into a box of radius ``rout``."""
    src, dst = [], []
    for c in y:
        lo = max(-rb, -rout - c)
        hi = min(rb, rout - c)
        if lo > hi:
            return None
        src.append(slice(lo + rb, hi + rb + 1))
        dst.append(slice(lo + c + rout, hi + c + rout + 1))
    return tuple(src), tuple(dst)


def _shift_add(small: LatticeFunction, big: LatticeFunction, rout: int) -> np.ndarray:
    out = LatticeFunction.zeros(small.d, rout, small.exact)._values.copy()
    bv = big._values
    for y, v in small.items():
        sl = _shift_slices(y, big.rmax, rout)
        if sl is None:
            continue
        src, dst = sl
        out[dst] += v * bv[src]
    return out


def _kernel_at(f: LatticeFunction, g: LatticeFunction, pts: np.ndarray) -> np.ndarray:
    fv = np.ascontiguousarray(f._values).ravel()
    gflip = np.ascontiguousarray(np.flip(g._values)).ravel()
    return _kernels.conv_at_points(fv, f.rmax, gflip, g.rmax, np.ascontiguousarray(pts, dtype=np.int64))


@lru_cache(maxsize=8)
def _box_points(d: int, r: int) -> np.ndarray:
    axes = [np.arange(-r, r + 1)] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    return np.ascontiguousarray(grid, dtype=np.int64)


def convolve(f: LatticeFunction, g: LatticeFunction, rmax: int | None = None) -> LatticeFunction:
    """(f*g)(x) = sum_y f(y) g(x-y), clipped to the box of radius ``rmax``.

    ``rmax`` defaults to the larger of the two input radii. The result's
    ``trunc`` bounds the l1 mass lost to clipping plus the propagated input
    bounds. Sparse operands use shift-and-add; dense float operands use the
    compiled kernel, evaluated only on orbit representatives when both
    operands are symmetric.
    """
    if f.d != g.d:
        raise DimensionMismatch(f"dimension {f.d} vs {g.d}")
    if f.exact != g.exact:
        raise ModeMismatch("cannot convolve exact with float functions")
    d = f.d
    rout = max(f.rmax, g.rmax) if rmax is None else rmax
    if f.support_radius < 0 or g.support_radius < 0:
        out = LatticeFunction.zeros(d, rout, f.exact)
        out.trunc = f.trunc * float(g.l1()) + g.trunc * float(f.l1()) + f.trunc * g.trunc
        return out
    fc, gc = f.compact(), g.compact()
    if fc.nnz > gc.nnz:
        fc, gc = gc, fc
    cells = (2 * rout + 1) ** d
    shift_cost = fc.nnz * min(cells, (2 * gc.rmax + 1) ** d)
    if f.exact or shift_cost <= 4 * cells or d == 1:
        vals = _shift_add(fc, gc, rout)
    else:
        overlap = (2 * min(fc.rmax, gc.rmax) + 1) ** d
        kernel_pts = len(orbit_reps(d, rout)) if (fc.symmetric and gc.symmetric) else cells
        if shift_cost <= kernel_pts * overlap:
            vals = _shift_add(fc, gc, rout)
        elif fc.symmetric and gc.symmetric:
            reps = orbit_reps(d, rout)
            at_reps = _kernel_at(fc, gc, reps)
            vals = at_reps[orbit_index(d, rout)].reshape((2 * rout + 1,) * d)
        else:
            vals = _kernel_at(fc, gc, _box_points(d, rout)).reshape((2 * rout + 1,) * d)
    out = LatticeFunction(vals, f.exact)
    l1f, l1g = float(f.l1()), float(g.l1())
    clipped = 0.0
    if fc.rmax + gc.rmax > rout:
        # |f*g| <= |f|*|g| pointwise, so the mass outside the box is at most this
        clipped = max(l1f * l1g - float(out.l1()), 0.0)
    out.trunc = clipped + f.trunc * l1g + g.trunc * l1f + f.trunc * g.trunc
    return out


# norm


@lru_cache(maxsize=16)
def norm_weight(d: int, rmax: int) -> np.ndarray:
    """|x|_2^d on the box, with the origin weighted by 1."""
    ax = np.arange(-rmax, rmax + 1, dtype=np.float64) ** 2
    sq = np.zeros((2 * rmax + 1,) * d)
    for i in range(d):
        shape = [1] * d
        shape[i] = -1
        sq = sq + ax.reshape(shape)
    w = sq ** (d / 2.0)
    w[(rmax,) * d] = 1.0
    w.setflags(write=False)
    return w


def banach_norm(f: LatticeFunction) -> float:
    """max(sum_x |f(x)|, sup_x |f(x)| |x|^d) with the origin weighted by 1.

    Exact functions are converted to float for the evaluation, since |x|^d is
    irrational for odd d.
    """
    ff = f.to_float()
    if ff.values.size == 0:
        return 0.0
    a = np.abs(ff.values)
    l1 = math.fsum(a.ravel())
    sup = float(np.max(a * norm_weight(f.d, f.rmax)))
    return max(l1, sup)


def delta_rw(mu, d: int, rmax: int = 1, exact: bool | None = None) -> LatticeFunction:
    """delta_0 - mu * (indicator of the 2d unit neighbours)."""
    if exact is None:
        exact = isinstance(mu, (int, Fraction))
    pts = {(0,) * d: 1}
    for i in range(d):
        for s in (1, -1):
            e = [0] * d
            e[i] = s
            pts[tuple(e)] = -mu
    return LatticeFunction.from_points(d, rmax, pts, exact)


@dataclass(frozen=True)
class NeumannResult:
    """Outcome of :func:`neumann_invert`.

    ``residual`` is ``||clip(f*g) - delta_0||`` recomputed by an explicit
    convolution; ``bound`` is 2^{d+1} r / (1 - 2^{d+1} r) with r = ``||f - delta_0||``.
    """

    inverse: LatticeFunction
    residual: float
    terms: int
    r: float
    bound: float
    inverse_distance: float

    @property
    def within_bound(self) -> bool:
        return self.inverse_distance <= self.bound * (1 + 1e-12)


def neumann_invert(f: LatticeFunction, tol: float = 1e-12, max_terms: int = 500, rmax: int | None = None) -> NeumannResult:
    """Invert f as sum_k (delta_0 - f)^{*k}, every power clipped to the box.

    Stops once a term's norm drops below ``tol``. Because clipping is linear,
    the clipped products telescope and the residual equals the norm of the
    first omitted term.
    """
    d = f.d
    r_box = f.rmax if rmax is None else rmax
    one = LatticeFunction.delta(d, 0, f.exact)
    h = one - f
    r = banach_norm(h)
    c = 2.0 ** (d + 1)
    if c * r >= 1.0:
        raise NotInvertibleError(f"||f - delta_0|| = {r:.6g} is not below 2^-(d+1) = {1 / c:.6g}")
    h = h.with_radius(max(h.rmax, 0))
    g = one.with_radius(r_box)
    term = g
    k = 0
    while True:
        if k >= max_terms:
            raise ConvergenceError(f"term norm still {banach_norm(term):.3g} after {max_terms} terms")
        term = convolve(term, h, r_box)
        k += 1
        g = g + term
        if banach_norm(term) < tol:
            break
    residual = banach_norm(convolve(f, g, r_box) - one)
    dist = banach_norm(g - one)
    return NeumannResult(g, residual, k + 1, r, c * r / (1 - c * r), dist)


# series in lambda


class SeriesFunction:
    """Lattice function whose values are polynomials in lambda, truncated at degree ``n_max``.

    ``coeffs[n]`` is the coefficient of lambda^n as an exact object array on
    the box of radius ``n_max``; that box holds every walk of length <= n_max.
    """

    def __init__(self, coeffs: np.ndarray, n_max: int | None = None):
        coeffs = np.asarray(coeffs, dtype=object)
        if n_max is None:
            n_max = coeffs.shape[0] - 1
        if coeffs.shape[0] != n_max + 1:
            raise ValueError("need one coefficient array per degree 0..n_max")
        side = coeffs.shape[1] if coeffs.ndim > 1 else 1
        if coeffs.ndim < 2 or side != 2 * n_max + 1 or any(s != side for s in coeffs.shape[1:]):
            raise ValueError(f"coefficient arrays must be centred boxes of radius {n_max}")
        coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        self.coeffs = coeffs
        self.n_max = n_max

    @property
    def d(self) -> int:
        return self.coeffs.ndim - 1

    @classmethod
    def zeros(cls, d: int, n_max: int) -> "SeriesFunction":
        arr = np.empty((n_max + 1,) + (2 * n_max + 1,) * d, dtype=object)
        arr.fill(0)
        return cls(arr, n_max)

    @classmethod
    def delta(cls, d: int, n_max: int) -> "SeriesFunction":
        arr = cls.zeros(d, n_max).coeffs.copy()
        arr[(0,) + (n_max,) * d] = 1
        return cls(arr, n_max)

    @classmethod
    def from_terms(cls, d: int, n_max: int, terms) -> "SeriesFunction":
        """Build from ``{n: LatticeFunction}`` (exact) coefficient functions."""
        arr = cls.zeros(d, n_max).coeffs.copy()
        for n, fn in terms.items():
            if n > n_max:
                continue
            arr[n] = fn.with_radius(n_max).values
        return cls(arr, n_max)

    def coefficient(self, n: int) -> LatticeFunction:
        return LatticeFunction(self.coeffs[n], exact=True)

    def evaluate(self, lam, rmax: int | None = None) -> LatticeFunction:
        """Sum_n lam^n coeff_n; exact for rational ``lam``, float otherwise."""
        exact = isinstance(lam, (int, Fraction))
        if exact:
            acc = np.empty(self.coeffs.shape[1:], dtype=object)
            acc.fill(0)
            for n in range(self.n_max, -1, -1):
                acc = acc * lam + self.coeffs[n]
            out = LatticeFunction(acc, True)
        else:
            acc = np.zeros(self.coeffs.shape[1:])
            for n in range(self.n_max, -1, -1):
                acc = acc * float(lam) + self.coeffs[n].astype(np.float64)
            out = LatticeFunction(acc, False)
        return out if rmax is None else out.with_radius(rmax)

    def _check(self, other):
        if not isinstance(other, SeriesFunction):
            raise TypeError(f"expected SeriesFunction, got {type(other).__name__}")
        if other.d != self.d or other.n_max != self.n_max:
            raise ValueError(f"series parameters differ: (d={self.d}, n_max={self.n_max}) vs (d={other.d}, n_max={other.n_max})")

    def __add__(self, other):
        self._check(other)
        return SeriesFunction(self.coeffs + other.coeffs, self.n_max)

    def __sub__(self, other):
        self._check(other)
        return SeriesFunction(self.coeffs - other.coeffs, self.n_max)

    def __neg__(self):
        return SeriesFunction(-self.coeffs, self.n_max)

    def __mul__(self, scalar):
        return SeriesFunction(self.coeffs * _as_exact(scalar), self.n_max)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, SeriesFunction):
            return NotImplemented
        return self.d == other.d and self.n_max == other.n_max and bool(np.all(self.coeffs == other.coeffs))

    __hash__ = None

    def is_zero(self) -> bool:
        return all(v == 0 for v in self.coeffs.ravel().tolist())

    def nonzero_degrees(self) -> list[int]:
        return [n for n in range(self.n_max + 1) if any(v != 0 for v in self.coeffs[n].ravel().tolist())]


def series_convolve(F: SeriesFunction, G: SeriesFunction) -> SeriesFunction:
    """Exact product of two lambda-series, truncated at degree n_max."""
    F._check(G)
    n_max, d = F.n_max, F.d
    out = SeriesFunction.zeros(d, n_max).coeffs.copy()
    fterms = [F.coefficient(i).compact() for i in range(n_max + 1)]
    gterms = [G.coefficient(j) for j in range(n_max + 1)]
    for i, fi in enumerate(fterms):
        if fi.support_radius < 0:
            continue
        for j in range(n_max + 1 - i):
            if gterms[j].support_radius < 0:
                continue
            out[i + j] += _shift_add(fi, gterms[j], n_max)
    return SeriesFunction(out, n_max)
