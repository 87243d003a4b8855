import itertools
from fractions import Fraction

import numpy as np
import pytest

from lacelab.expansion import (
    A_N_bound,
    delta_saw,
    enumerate_expansion,
    fit_A_constant,
    fixed_point_defect,
    pi_N,
    pi_N_series,
    triple_grid,
    triple_sum_check,
    triple_sum_scan,
)
from lacelab.lattice import delta_rw
from lacelab.srw import radii
from lacelab.symmetry import symmetry_defect
from lacelab.walks import BudgetExceeded

B = Fraction


@pytest.fixture(scope="module")
def table():
    return enumerate_expansion(2, 8)


def closed_walks(d, n):
    for steps in itertools.product(range(2 * d), repeat=n):
        pos = [0] * d
        pts = [tuple(pos)]
        for s in steps:
            pos[s // 2] += 1 if s % 2 == 0 else -1
            pts.append(tuple(pos))
        if pts[-1] == (0,) * d:
            yield pts


def pi2_origin_oracle(beta, n):
    """[lambda^n] Pi^(2)(0) from its two-loop structure.

    A 2-edge lace on [0,n] is {0 t, s n} with 0 < s < t < n. Adding st' keeps
    the lace unless it starts at 0 and ends past t, or ends at n and starts
    before s; every other non-lace edge is compatible.
    """
    total = 0
    for pts in closed_walks(2, n):
        for t in range(2, n):
            if pts[t] != pts[0]:
                continue
            for s in range(1, t):
                if pts[s] != pts[n]:
                    continue
                prod = beta**2
                for b in range(1, n + 1):
                    for a in range(b):
                        if (a, b) in ((0, t), (s, n)):
                            continue
                        if (a == 0 and b > t) or (b == n and a < s):
                            continue
                        if pts[a] == pts[b]:
                            prod *= 1 - beta
                total += prod
    return total


def test_pi1_vanishes_off_origin(table):
    P = pi_N(2, B(1, 3), B(1, 5), 1, 8, table)
    assert all(x == (0, 0) for x, _ in P.items())
    assert P[(1, 0)] == 0


def test_pi_vanishes_at_beta_zero(table):
    for N in table.N_values:
        assert pi_N_series(2, B(0), N, 8, table).is_zero()


def test_pi2_origin_two_loop_oracle(table):
    beta = B(1, 5)
    S = pi_N_series(2, beta, 2, 8, table)
    for n in range(0, 9):
        assert S.coeffs[(n, 8, 8)] == pi2_origin_oracle(beta, n), n


def test_pi_symmetric(table):
    for N in table.N_values:
        S = pi_N_series(2, B(1, 2), N, 8, table)
        for n in range(9):
            assert symmetry_defect(S.coeffs[n]) == 0


def test_pi2_bounded_by_cube_coefficientwise(table):
    from lacelab.harness import check_pi_structure

    for beta in (B(1, 5), B(1, 2), B(1)):
        assert check_pi_structure(2, [beta], 8, table).passed


def test_delta_saw_beta_zero(table):
    lam = B(1, 6)
    assert delta_saw(2, B(0), lam, 4, 8, table).Delta == delta_rw(lam, 2, 8)


def test_delta_saw_sum_nonnegative_subcritical(table):
    for beta in (B(1, 10), B(1, 2), B(1)):
        for lam in (B(1, 10), B(1, 5), B(1, 4)):
            assert delta_saw(2, beta, lam, 8, 8, table).Delta.total() >= 0


def test_delta_saw_tail_reported(table):
    ds = delta_saw(2, B(1, 2), B(1, 5), 2, 8, table)
    assert ds.tail_estimate == pytest.approx(ds.per_N_norm[2])
    assert delta_saw(2, B(1, 2), B(1, 5), 8, 8, table).tail_estimate == 0


@pytest.mark.parametrize("beta", [B(1, 4), B(1, 2), B(1)])
def test_fixed_point_series(beta, table):
    assert fixed_point_defect(2, beta, 8, 8, table).is_zero()


def test_fixed_point_fails_when_laces_dropped(table):
    bad = fixed_point_defect(2, B(1, 2), 8, 2, table).nonzero_degrees()
    assert bad and min(bad) == 4


def test_fixed_point_d3(table):
    t3 = enumerate_expansion(3, 5)
    assert fixed_point_defect(3, B(1, 3), 5, 5, t3).is_zero()


def test_expansion_budget():
    with pytest.raises(BudgetExceeded):
        enumerate_expansion(3, 8, budget=1000)


def test_A2_origin():
    A = A_N_bound(5, 2, 3).A
    assert A[(0,) * 5] == 1.0
    assert A[(1, 0, 0, 0, 0)] == 1.0
    assert A[(2, 0, 0, 0, 0)] == pytest.approx(2.0**-9)


def test_A3_over_A2_stable():
    ratios = []
    for R in (4, 6):
        A2, A3 = A_N_bound(5, 2, R).A, A_N_bound(5, 3, R).A
        inner = A2.with_radius(3)
        ratios.append(float(np.max(A3.with_radius(3).values / inner.values)))
    assert np.isfinite(ratios).all()
    assert ratios[1] == pytest.approx(ratios[0], rel=0.05)


def test_fit_A_constant():
    C, ratios = fit_A_constant(5, 4, 5, triple_constant=25.0)
    assert all(r <= C**N * (1 + 1e-12) for N, r in ratios.items())
    assert any(r == pytest.approx(C**N) for N, r in ratios.items())


def test_A_rejects_low_dimension():
    with pytest.raises(ValueError):
        A_N_bound(4, 3, 3)


def test_triple_sum_origin_reduces_to_power_sum():
    d, R = 5, 4
    r = radii(d, R)
    expected = float(np.sum(np.where(r > 0, r, 1.0) ** (8 - 4 * d)))
    assert triple_sum_check(d, (0,) * d, (0,) * d, R) == pytest.approx(expected, rel=1e-12)


def test_triple_sum_brute_force_small_box():
    d, R = 5, 2
    u, v = (1, 0, 0, 0, 0), (0, 2, 0, 0, 0)

    def p(x, a):
        s = sum(c * c for c in x)
        return 1.0 if s == 0 else s ** (a / 2)

    total = 0.0
    for w in itertools.product(range(-R, R + 1), repeat=d):
        wu = tuple(a - b for a, b in zip(w, u))
        wv = tuple(a - b for a, b in zip(w, v))
        total += p(w, 4 - 2 * d) * p(wu, 2 - d) * p(wv, 2 - d)
    assert triple_sum_check(d, u, v, R) == pytest.approx(total / (p(u, 2 - d) * p(v, 2 - d)), rel=1e-12)


def test_triple_grid_size():
    assert len(triple_grid(5)) == 23


def test_triple_scan_small_boxes_converging():
    scan = triple_sum_scan(5, 6, 8, radius=2.0)
    assert np.isfinite(scan.sup)
    assert scan.max_rel_change < 0.05
