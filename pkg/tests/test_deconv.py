from fractions import Fraction

import numpy as np
import pytest

from lacelab.deconv import (
    CertificateError,
    build_rho,
    certified_perturbation,
    check_rhoG_uniform,
    choose_mu,
    deconvolve,
    default_tolerance,
    green_asymp_check,
    harmonicity_defect,
    moment_sums,
    rho_green_norm,
    rho_green_norm_mu,
)
from lacelab.lattice import LatticeFunction, NotInvertibleError, delta_rw
from lacelab.srw import critical_green, green_function, green_rw, radii
from lacelab.walks import enumerate_cn, green_saw, susceptibility

B = Fraction


@pytest.fixture(scope="module")
def run_d5():
    beta = 0.01
    return beta, deconvolve(certified_perturbation(5, beta, seed=3), beta, 5)


def test_choose_mu_examples():
    assert choose_mu(delta_rw(B(1, 9), 3)) == B(1, 9)
    assert choose_mu(LatticeFunction.delta(3, exact=True)) == 0
    assert choose_mu(certified_perturbation(5, 0.01, seed=2)) == pytest.approx(0.1, abs=1e-15)
    assert choose_mu(certified_perturbation(5, 0.01, seed=2)) <= 0.1


def test_choose_mu_out_of_range():
    with pytest.raises(ValueError):
        choose_mu(LatticeFunction.delta(2, exact=True, scale=-1))


def test_certified_perturbation_properties():
    d, beta = 5, 0.02
    Delta = certified_perturbation(d, beta, amplitude=0.7, seed=9)
    pi = (Delta - delta_rw(0.1, d, 2)) * (1 / beta)
    assert pi.symmetric
    assert abs(pi.total()) < 1e-15
    r = radii(d, 2)
    assert np.all(np.abs(pi.values) * np.where(r > 0, r, 1.0) ** (d + 4) <= 1 + 1e-12)


def test_build_rho_examples():
    cert = build_rho(delta_rw(B(1, 8), 4), B(1, 8), 0.1)
    assert cert.valid and cert.rho.nnz == 0
    asym = delta_rw(0.1, 5, 2) + LatticeFunction.from_points(5, 2, {(1, 0, 0, 0, 0): 1e-3, (0, 0, 0, 0, 0): -1e-3})
    cert = build_rho(asym, 0.1, 0.01)
    assert not cert.symmetry_ok and not cert.valid
    cert = build_rho(certified_perturbation(5, 0.01, seed=4), 0.1, 0.01)
    assert cert.valid and cert.C2 <= 1 + 1e-12


def test_build_rho_zero_sum_from_delta_saw():
    from lacelab.expansion import delta_saw

    Delta = delta_saw(2, B(1, 10), B(1, 5), 8, 8).Delta
    cert = build_rho(Delta, choose_mu(Delta), 0.1)
    assert cert.zero_sum_ok and cert.symmetry_ok


def test_moments_vanish_for_symmetric_rho():
    rho = build_rho(certified_perturbation(3, 0.01, seed=1), 1 / 6, 0.01).rho
    first, mixed = moment_sums(rho)
    assert max(map(abs, first)) < 1e-15 and max(map(abs, mixed)) < 1e-15


def test_harmonicity_defect_zero():
    for x in [(1, 0, 0), (2, 3, -1), (1, 1, 1, 1, 1)]:
        assert abs(harmonicity_defect(x)) < 1e-12


def test_rho_green_norm_zero():
    assert rho_green_norm(LatticeFunction.zeros(3, 1), critical_green(3, 3), 2).norm == 0.0


def test_rho_green_norm_orbit_path_matches_box():
    rho = build_rho(certified_perturbation(5, 0.01, seed=1), 0.1, 0.01).rho
    a = rho_green_norm(rho, critical_green(5, 6), 4)
    b = rho_green_norm_mu(rho, 0.1, 4)
    assert a.norm == pytest.approx(b.norm, rel=1e-12)
    assert a.profile == pytest.approx(b.profile, rel=1e-10)


def test_rho_green_profile_stable_R12_to_R16():
    rho = build_rho(certified_perturbation(5, 0.01, seed=1), 0.1, 0.01).rho
    small, large = rho_green_norm_mu(rho, 0.1, 12), rho_green_norm_mu(rho, 0.1, 16)
    assert large.norm == pytest.approx(small.norm, rel=0.05)
    assert max(large.profile.values()) == pytest.approx(max(small.profile.values()), rel=0.05)


def test_uniform_in_mu():
    rho = build_rho(certified_perturbation(5, 0.01, seed=1), 0.1, 0.01).rho
    rep = check_rhoG_uniform(rho, 5, R=4, n_max=6)
    assert len(rep.norms) == 9 and np.isfinite(rep.max_norm)
    rep = check_rhoG_uniform(rho, 5, mu_grid=[-0.05, 0.0, 0.05, 0.1], R=4, n_max=6)
    i0 = rep.mu_grid.index(0.0)
    assert rep.norms[i0] == pytest.approx(rho_green_norm(rho, LatticeFunction.delta(5, 2), 4).norm)
    # factorisation identity holds to round-off once the n_max truncation term is included
    assert max(rep.factorization_defect) < 1e-14


def test_deconvolve_pure_random_walk():
    d, R = 5, 4
    res = deconvolve(delta_rw(0.1, d, 1), 0.01, R)
    assert res.G.allclose(critical_green(d, R), atol=1e-13)
    assert float(np.max(np.abs(res.E.values))) < 1e-13


def test_deconvolve_bound_and_residual(run_d5):
    beta, res = run_d5
    rep = res.report
    assert rep["certificate_valid"]
    assert rep["ratio_ok"] and rep["max_ratio"] <= 2
    assert rep["residual"] <= 1e-8 and rep["residual_ok"]
    assert rep["interior_residual"] <= 1e-10
    assert rep["E_within_bound"]


def test_deconvolve_EG_decays_like_green(run_d5):
    beta, res = run_d5
    prof = res.report["EG_profile"]
    outer = [prof[k] for k in prof if 2 <= k <= 5]
    # |E*G_mu| |x|^{d-2} / beta stays of order one across the shells
    assert max(outer) <= 10 * min(outer)
    assert res.report["EG_constant"] < 10


def test_deconvolve_rejects_uncertified():
    d = 5
    bad = delta_rw(0.1, d, 2) + LatticeFunction.from_points(d, 2, {(2, 0, 0, 0, 0): 0.01, (0, 0, 0, 0, 0): -0.01})
    with pytest.raises(CertificateError):
        deconvolve(bad, 0.01, 3)


def test_deconvolve_rejects_large_beta():
    with pytest.raises(NotInvertibleError):
        deconvolve(certified_perturbation(5, 0.5, seed=1), 0.5, 3)


def test_default_tolerance():
    assert default_tolerance(5, 10) == pytest.approx(10 * np.finfo(float).eps * 21**5)


def test_asymp_beta_zero():
    lam = 1 / 8
    Gsaw = green_saw(2, 0.0, lam, 8, enumerate_cn(2, 8, 0.0, mode="float")).G
    Grw = green_rw(lam, 2, 8, 8, exact=False).G
    assert green_asymp_check(Gsaw, Grw, 0.0).constant < 1e-15


def _asymp_constant(table, beta, lam, R, dmu=0.0):
    d = 5
    chi = susceptibility(d, beta, lam, table.n_max, table)
    mu = (1 - 1 / chi) / (2 * d) + dmu
    Gsaw = green_saw(d, beta, lam, table.n_max, table).G.with_radius(R)
    return green_asymp_check(Gsaw, green_function(mu, d, R), beta).constant


def test_asymp_d5_finite_and_stable():
    table = enumerate_cn(5, 7, 0.05, mode="float")
    c3, c4 = (_asymp_constant(table, 0.05, 0.06, R) for R in (3, 4))
    assert np.isfinite(c3) and np.isfinite(c4)
    assert c4 == pytest.approx(c3, rel=0.25)


def test_asymp_mu_mismatch_grows_linearly():
    table = enumerate_cn(5, 7, 0.05, mode="float")
    base = _asymp_constant(table, 0.05, 0.06, 3)
    c1 = _asymp_constant(table, 0.05, 0.06, 3, 0.005) - base
    c2 = _asymp_constant(table, 0.05, 0.06, 3, 0.01) - base
    assert c1 > 0 and 1.5 < c2 / c1 < 2.6
