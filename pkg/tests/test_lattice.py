import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lacelab.lattice import (
    ConvergenceError,
    DimensionMismatch,
    LatticeFunction,
    ModeMismatch,
    NotInvertibleError,
    SeriesFunction,
    banach_norm,
    convolve,
    delta_rw,
    neumann_invert,
    series_convolve,
)
from lacelab.srw import pn


def brute_convolve(f, g, R):
    """Direct double loop over both supports."""
    out = {}
    for y, a in f.items():
        for z, b in g.items():
            x = tuple(p + q for p, q in zip(y, z))
            if max(map(abs, x)) <= R:
                out[x] = out.get(x, 0) + a * b
    return LatticeFunction.from_points(f.d, R, out, exact=f.exact)


def sparse_functions(d, radius=2, exact=True, max_points=5):
    coord = st.integers(-radius, radius)
    point = st.tuples(*[coord] * d)
    value = st.fractions(min_value=-3, max_value=3, max_denominator=7) if exact else st.floats(-3, 3, allow_nan=False)
    return st.dictionaries(point, value, min_size=1, max_size=max_points).map(
        lambda pts: LatticeFunction.from_points(d, radius, pts, exact)
    )


def test_delta_is_identity():
    f = LatticeFunction.from_points(2, 2, {(1, 0): Fraction(1, 3), (-2, 1): 5, (0, 0): -1}, exact=True)
    assert convolve(LatticeFunction.delta(2, 0, exact=True), f, 2) == f


def test_p1_squared_is_p2():
    assert convolve(pn(3, 1), pn(3, 1), 2) == pn(3, 2)


def test_hand_convolution_d1():
    half = LatticeFunction.from_points(1, 1, {(-1,): Fraction(1, 2), (1,): Fraction(1, 2)}, exact=True)
    out = convolve(half, half, 2)
    assert dict(out.items()) == {(-2,): Fraction(1, 4), (0,): Fraction(1, 2), (2,): Fraction(1, 4)}


@given(sparse_functions(2), sparse_functions(2))
def test_commutative(f, g):
    assert convolve(f, g, 4) == convolve(g, f, 4)


@given(sparse_functions(2, 1), sparse_functions(2, 1), sparse_functions(2, 1))
def test_associative(f, g, h):
    assert convolve(convolve(f, g, 2), h, 3) == convolve(f, convolve(g, h, 2), 3)


@given(sparse_functions(3, 2, max_points=6), sparse_functions(3, 2, max_points=6))
def test_matches_double_loop(f, g):
    assert convolve(f, g, 3) == brute_convolve(f, g, 3)


def test_dense_kernel_paths_match_double_loop():
    rng = np.random.default_rng(5)
    d, R = 3, 3
    sym = _radial(d, R)
    asym = LatticeFunction(rng.normal(size=(2 * R + 1,) * d))
    for f, g in [(sym, sym), (sym, asym)]:
        fast = convolve(f, g, R)
        slow = brute_convolve(f, g, R)
        assert fast.allclose(slow, atol=1e-11)


def _radial(d, R):
    pts = itertools.product(range(-R, R + 1), repeat=d)
    return LatticeFunction.from_points(d, R, {x: 1.0 / (1 + sum(c * c for c in x)) for x in pts})


def test_clipping_records_truncation():
    f = LatticeFunction.from_points(1, 2, {(2,): 1.0, (0,): 1.0})
    out = convolve(f, f, 2)
    assert out[(2,)] == 2.0
    assert out.trunc == pytest.approx(1.0)


def test_mismatched_inputs():
    with pytest.raises(DimensionMismatch):
        convolve(LatticeFunction.delta(1), LatticeFunction.delta(2))
    with pytest.raises(ModeMismatch):
        convolve(LatticeFunction.delta(1, exact=True), LatticeFunction.delta(1))


def test_banach_norm_examples():
    assert banach_norm(LatticeFunction.delta(3)) == 1.0
    assert banach_norm(delta_rw(Fraction(1, 10), 5)) == 2.0
    assert banach_norm(LatticeFunction.zeros(2, 3)) == 0.0


def test_banach_norm_sup_part_dominates():
    f = LatticeFunction.from_points(2, 5, {(5, 0): 0.5})
    assert banach_norm(f) == pytest.approx(0.5 * 25)


@given(sparse_functions(5, 2, exact=False, max_points=4), sparse_functions(5, 2, exact=False, max_points=4))
def test_norm_submultiplicative(f, g):
    assert banach_norm(convolve(f, g, 4)) <= 2**6 * banach_norm(f) * banach_norm(g) * (1 + 1e-12)


def test_delta_rw_examples():
    for mu in (Fraction(1, 7), Fraction(-1, 20), 0):
        D = delta_rw(mu, 3)
        assert D[(0, 0, 0)] == 1
    assert delta_rw(Fraction(1, 6), 3).total() == 0
    assert delta_rw(0, 4) == LatticeFunction.delta(4, 1, exact=True)


def test_neumann_identity():
    res = neumann_invert(LatticeFunction.delta(5))
    assert res.inverse.allclose(LatticeFunction.delta(5))
    assert res.residual == 0.0


def test_neumann_small_perturbation_d5():
    rng = np.random.default_rng(11)
    pts = {tuple(int(c) for c in rng.integers(-1, 2, size=5)): float(rng.normal()) for _ in range(6)}
    h = LatticeFunction.from_points(5, 1, pts)
    h = h * (0.001 / banach_norm(h))
    res = neumann_invert(LatticeFunction.delta(5, 1) + h, tol=1e-13, rmax=3)
    assert res.residual < 1e-13
    assert res.within_bound


def test_neumann_exact_d1_geometric():
    f = LatticeFunction.from_points(1, 1, {(0,): 1, (1,): Fraction(-1, 10)}, exact=True)
    res = neumann_invert(f, tol=1e-15, rmax=20)
    for k in range(10):
        assert res.inverse[(k,)] == Fraction(1, 10**k)


def test_neumann_rejects_large_perturbation():
    with pytest.raises(NotInvertibleError):
        neumann_invert(delta_rw(0.1, 5))


def test_neumann_max_terms():
    f = LatticeFunction.from_points(1, 1, {(0,): 1.0, (1,): -0.2})
    with pytest.raises(ConvergenceError):
        neumann_invert(f, tol=1e-300, max_terms=3, rmax=10)


def test_series_identity_and_degree_zero():
    d, n = 2, 3
    G = SeriesFunction.from_terms(d, n, {k: pn(d, k) for k in range(n + 1)})
    assert series_convolve(SeriesFunction.delta(d, n), G) == G
    F = SeriesFunction.from_terms(d, n, {0: delta_rw(Fraction(1, 3), d), 2: pn(d, 1)})
    prod = series_convolve(F, G)
    assert prod.coefficient(0) == convolve(F.coefficient(0), G.coefficient(0), n)


def test_series_green_times_delta_rw():
    # sum_n lambda^n (walk counts) times (delta_0 - lambda * unit vectors) = delta_0
    d, n_max = 2, 5
    from lacelab.srw import walk_counts

    counts = walk_counts(d, n_max)
    G = SeriesFunction.from_terms(d, n_max, {n: LatticeFunction(counts[n], exact=True) for n in range(n_max + 1)})
    D = SeriesFunction.from_terms(d, n_max, {0: LatticeFunction.delta(d, 0, exact=True), 1: delta_rw(1, d) - LatticeFunction.delta(d, 1, exact=True)})
    assert series_convolve(G, D) == SeriesFunction.delta(d, n_max)


def test_series_evaluate_matches_horner():
    d, n = 1, 2
    S = SeriesFunction.from_terms(d, n, {0: LatticeFunction.delta(1, exact=True), 2: pn(1, 2)})
    v = S.evaluate(Fraction(1, 2))
    assert v[(0,)] == 1 + Fraction(1, 4) * Fraction(1, 2)
