import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lacelab.lattice import LatticeFunction, convolve, delta_rw
from lacelab.srw import (
    critical_green,
    edgeworth_fit,
    gaussian_bound_fit,
    green_at_points,
    green_function,
    green_rw,
    pn,
    pn_at_points,
    radii,
    step_kernel,
    walk_counts,
)


def test_step_kernel():
    assert dict(step_kernel(1).items()) == {(-1,): Fraction(1, 2), (1,): Fraction(1, 2)}
    k5 = step_kernel(5)
    assert k5.nnz == 10 and set(v for _, v in k5.items()) == {Fraction(1, 10)}
    for d in range(1, 6):
        assert step_kernel(d).total() == 1


def test_pn_small_cases():
    assert pn(3, 0) == LatticeFunction.delta(3, 0, exact=True)
    assert dict(pn(1, 2).items()) == {(-2,): Fraction(1, 4), (0,): Fraction(1, 2), (2,): Fraction(1, 4)}


@given(st.integers(1, 3), st.integers(0, 4), st.integers(0, 4))
def test_chapman_kolmogorov(d, n, m):
    assert convolve(pn(d, n), pn(d, m), n + m) == pn(d, n + m)


def test_pn_at_points_matches_stencil():
    d, n = 3, 7
    pts = [(0, 0, 0), (1, 0, 0), (2, 1, 0), (3, 2, 2), (7, 0, 0)]
    rows = pn_at_points(d, n, pts)
    for k in range(n + 1):
        exact = pn(d, k)
        for j, x in enumerate(pts):
            assert rows[k, j] == pytest.approx(float(exact[x]) if max(map(abs, x)) <= k else 0.0, abs=1e-15)


def test_walk_counts_totals():
    c = walk_counts(2, 5)
    assert [int(a.sum()) for a in c] == [4**n for n in range(6)]


def test_green_rw_mu_zero():
    assert green_rw(0, 3, 5, 3).G == LatticeFunction.delta(3, 3, exact=True)


@pytest.mark.parametrize("mu", [Fraction(1, 8), Fraction(-1, 12)])
def test_green_times_delta_within_tail(mu):
    d, n_max = 2, 30
    gs = green_rw(mu, d, n_max, 4, exact=False)
    defect = convolve(gs.G, delta_rw(float(mu), d), 3) - LatticeFunction.delta(d, 3)
    assert gs.tail_rigorous
    assert float(np.max(np.abs(defect.values))) <= gs.tail


def test_green_rw_exact_d1_geometric():
    # d = 1, mu = 1/4: G(0) = sum_k C(2k,k) 4^{-k} 4^{-k} = 1/sqrt(1 - 1/4)
    gs = green_rw(Fraction(1, 4), 1, 40, 0)
    assert abs(float(gs.G[(0,)]) - 1 / math.sqrt(0.75)) <= gs.tail


@pytest.mark.parametrize("mu,d", [(0.05, 3), (-0.04, 3), (0.09, 5)])
def test_integral_representation_matches_series(mu, d):
    pts = [(0,) * d, (1,) + (0,) * (d - 1), (2, 1) + (0,) * (d - 2), (3, 3) + (0,) * (d - 2)]
    direct = green_at_points(mu, d, pts)
    series = green_rw(mu, d, 400, 3, exact=False).G
    for x, v in zip(pts, direct):
        assert v == pytest.approx(series[x], rel=1e-12, abs=1e-15)


def test_critical_origin_d5_series_oracle():
    # partial sums of p_n(0) until successive values differ by < 1e-8, then the
    # even-n tail sum_{m > n} C m^{-5/2} ~ p_n(0) n / 3
    p = pn_at_points(5, 2400, [(0,) * 5])[:, 0]
    s = np.cumsum(p)
    n = next(k for k in range(4, len(s), 2) if s[k] - s[k - 2] < 1e-8)
    oracle = s[n] + p[n] * n / 3
    value = green_at_points(0.1, 5, [(0,) * 5])[0]
    assert value == pytest.approx(1.1563081248402, abs=1e-11)
    assert value == pytest.approx(oracle, abs=2e-8)
    assert s[n] < value


def test_critical_green_symmetric_and_positive():
    G = critical_green(3, 4)
    assert G.symmetric
    assert float(np.min(G.values)) > 0
    assert G[(0, 0, 0)] == pytest.approx(1.51638605915, abs=1e-10)


def test_critical_tail_is_an_estimate():
    gs = green_rw(0.1, 5, 20, 2)
    assert not gs.tail_rigorous
    assert gs.tail > 0
    # the estimate should cover the true remainder at the origin
    assert 1.1563081248402 - gs.G[(0,) * 5] <= 2 * gs.tail


def test_d2_critical_rejected_untruncated():
    with pytest.raises(ValueError):
        green_function(0.25, 2, 2)
    assert math.isinf(green_rw(0.25, 2, 6, 2).tail)


def test_edgeworth_synthetic_exact_model():
    d, R = 5, 8
    r = radii(d, R)
    vals = 0.37 * np.where(r > 0, r, 1.0) ** (2 - d)
    fit = edgeworth_fit(LatticeFunction(vals))
    assert fit.a == pytest.approx(0.37, abs=1e-10)
    assert abs(fit.b) < 1e-10


def test_edgeworth_critical_d5():
    fit = edgeworth_fit(critical_green(5, 8))
    assert fit.a > 0
    assert fit.a == pytest.approx(0.1267, abs=5e-4)
    assert fit.rms_rel_residual < 0.02


@pytest.mark.xfail(strict=True, reason="residual is anisotropic O(|x|^-d); scaled spread is about 8.7")
def test_edgeworth_scaled_residual_within_factor_three():
    fit = edgeworth_fit(critical_green(5, 8))
    assert fit.scaled_spread <= 3


def test_edgeworth_needs_window_inside_box():
    with pytest.raises(ValueError):
        edgeworth_fit(critical_green(5, 3))


def test_gaussian_bound():
    C, c = gaussian_bound_fit(2, 12)
    assert C > 0 and c > 0
    for n in range(1, 13):
        p = pn(2, n, exact=False)
        r2 = radii(2, n) ** 2
        assert np.all(p.values <= C * n ** (-1.0) * np.exp(-c * r2 / n) + 1e-15)
