"""Deconvolution of a near-random-walk kernel Delta into a Green's function G with Delta*G = delta_0.

Pipeline: choose mu so that Delta - Delta^rw_mu has zero sum, certify the
rescaled difference rho, invert Delta*G^rw_mu by a Neumann series, and set
G = G^rw_mu + E*G^rw_mu where (Delta*G^rw_mu)^{-1} = delta_0 + E.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .lattice import LatticeFunction, NotInvertibleError, banach_norm, convolve, delta_rw, neumann_invert
from .srw import _orbit_sizes, critical_green, green_at_points, green_function, green_rw, pn, radii
from .symmetry import orbit_index, orbit_reps


class CertificateError(ValueError):
    """Delta fails the certificate gate (symmetry, zero sum of rho, or decay)."""


def choose_mu(Delta: LatticeFunction, check: bool = True):
    """mu = (1 - sum Delta) / (2d); the unique s with sum(Delta - Delta^rw_s) = 0."""
    d = Delta.d
    total = Delta.total()
    mu = (1 - total) / (2 * d) if Delta.exact else (1.0 - total) / (2 * d)
    if check:
        lo, hi = -1 / (4 * d), 1 / (2 * d)
        if not lo <= float(mu) <= hi * (1 + 1e-15):
            raise ValueError(f"mu = {float(mu):.6g} outside [{lo:.6g}, {hi:.6g}]: Delta is not in the small-beta regime")
        if Delta.exact and mu > Fraction(1, 2 * d):
            raise ValueError(f"mu = {mu} exceeds 1/(2d)")
    if not Delta.exact and mu > 1 / (2 * d):
        # rounding in the sum of a zero-mass perturbation
        mu = 1 / (2 * d)
    return mu


def _weight(d: int, R: int, exponent: float) -> np.ndarray:
    r = radii(d, R)
    w = np.where(r > 0, r, 1.0) ** exponent
    return w


@dataclass(frozen=True)
class RhoCertificate:
    """rho = (Delta - Delta^rw_mu) / (C2 beta) together with the checks it must pass."""

    rho: LatticeFunction
    C2: float
    symmetry_ok: bool
    zero_sum_ok: bool
    decay_constant: float
    exponent: float

    @property
    def valid(self) -> bool:
        return self.symmetry_ok and self.zero_sum_ok and self.decay_constant <= 1.0 + 1e-12


def build_rho(Delta: LatticeFunction, mu, beta, exponent: float | None = None) -> RhoCertificate:
    """Rescale Delta - Delta^rw_mu so that sup |rho(x)| |x|^exponent is exactly 1.

    ``exponent`` defaults to d + 4.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    d = Delta.d
    exponent = d + 4 if exponent is None else exponent
    R = max(Delta.rmax, 1)
    diff = (Delta.with_radius(R) - delta_rw(mu, d, R, exact=Delta.exact)).to_float()
    diff.trunc = 0.0
    w = _weight(d, R, exponent)
    sup = float(np.max(np.abs(diff.values) * w))
    if sup == 0.0:
        rho = LatticeFunction.zeros(d, R)
        return RhoCertificate(rho, 0.0, True, True, 0.0, exponent)
    C2 = sup / float(beta)
    rho = diff * (1.0 / (C2 * float(beta)))
    if Delta.exact:
        exact_diff = Delta.with_radius(R) - delta_rw(mu, d, R, exact=True)
        zero_sum = exact_diff.total() == 0
    else:
        zero_sum = abs(diff.total()) <= 1e-13 * max(diff.l1(), 1e-300)
    decay = float(np.max(np.abs(rho.values) * w))
    return RhoCertificate(rho, C2, rho.symmetric, zero_sum, decay, exponent)


def moment_sums(rho: LatticeFunction) -> tuple[list, list]:
    """First moments sum rho(y) y_i and off-diagonal second moments sum rho(y) y_i y_j."""
    d = rho.d
    first = [0] * d
    mixed = []
    for y, v in rho.items():
        for i in range(d):
            first[i] += v * y[i]
    for i in range(d):
        for j in range(i + 1, d):
            mixed.append(sum((v * y[i] * y[j] for y, v in rho.items()), 0))
    return first, mixed


def harmonicity_defect(x) -> float:
    """sum_i ((2-d)|x|^{-d} - (2-d) d x_i^2 |x|^{-d-2}), zero for x != 0."""
    d = len(x)
    r2 = float(sum(c * c for c in x))
    if r2 == 0:
        raise ValueError("x must be nonzero")
    r = math.sqrt(r2)
    return math.fsum((2 - d) * r ** (-d) - (2 - d) * d * c * c * r ** (-d - 2) for c in x)


def shell_profile(f: LatticeFunction, power: float) -> dict[int, float]:
    """sup over each shell round(|x|) = k of |f(x)| |x|^power (origin excluded)."""
    ff = f.to_float()
    r = radii(f.d, f.rmax)
    vals = np.abs(ff.values) * np.where(r > 0, r, 1.0) ** power
    shells = np.rint(r).astype(np.int64)
    out = {}
    for k in range(1, int(shells.max()) + 1):
        m = shells == k
        if m.any():
            out[k] = float(vals[m].max())
    return out


@dataclass(frozen=True)
class RhoGreenNorm:
    norm: float
    profile: dict


def rho_green_norm(rho: LatticeFunction, G: LatticeFunction, R: int | None = None) -> RhoGreenNorm:
    """||rho*G|| and the shell profile sup |(rho*G)(x)| |x|^{d+1}."""
    R = G.rmax - max(rho.support_radius, 0) if R is None else R
    conv = convolve(rho.compact(), G, R)
    return RhoGreenNorm(banach_norm(conv), shell_profile(conv, rho.d + 1))


def rho_green_norm_mu(rho: LatticeFunction, mu: float, R: int) -> RhoGreenNorm:
    """||rho*G^rw_mu|| on the box of radius R without materialising G on a box.

    For symmetric rho the convolution is symmetric, so it is evaluated at
    orbit representatives only, with G^rw_mu taken at the needed points
    from the integral representation. The l1 part weights each
    representative by its orbit size.
    """
    if not rho.symmetric:
        raise ValueError("rho must be symmetric")
    d = rho.d
    reps = orbit_reps(d, R)
    terms = [(np.asarray(y, dtype=np.int64), float(v)) for y, v in rho.to_float().items()]
    if not terms:
        return RhoGreenNorm(0.0, {})
    keys = {}
    shifted = []
    for y, _ in terms:
        diff = np.sort(np.abs(reps - y), axis=1)
        rows = [keys.setdefault(tuple(r), len(keys)) for r in diff.tolist()]
        shifted.append(np.asarray(rows))
    gvals = green_at_points(mu, d, list(keys))
    conv = np.zeros(len(reps))
    for (_, v), rows in zip(terms, shifted):
        conv += v * gvals[rows]
    r = np.sqrt((reps.astype(np.float64) ** 2).sum(axis=1))
    sizes = _orbit_sizes(reps)
    l1 = math.fsum(np.abs(conv) * sizes)
    w = np.where(r > 0, r, 1.0)
    sup = float(np.max(np.abs(conv) * w**d))
    scaled = np.abs(conv) * w ** (d + 1)
    shells = np.rint(r).astype(np.int64)
    profile = {int(k): float(scaled[shells == k].max()) for k in range(1, int(shells.max()) + 1) if (shells == k).any()}
    return RhoGreenNorm(max(l1, sup), profile)


@dataclass(frozen=True)
class UniformReport:
    mu_grid: list
    norms: list
    max_norm: float
    factorization_defect: list


def check_rhoG_uniform(rho: LatticeFunction, d: int, mu_grid=None, n_max: int = 8, R: int = 8) -> UniformReport:
    """||rho * G^rw_mu|| over a grid of mu in [-1/(4d), 1/(2d)].

    Also checks G^rw_mu * Delta^rw_{1/(2d)} = delta_0 - (1-2d mu) sum_{n>=1} (2d mu)^{n-1} p_n
    with both sides truncated at n_max, where they differ by exactly
    -(2d mu)^{n_max} p_{n_max+1}.
    """
    lo, hi = -1.0 / (4 * d), 1.0 / (2 * d)
    if mu_grid is None:
        mu_grid = list(np.linspace(lo, hi, 9))
    for m in mu_grid:
        if not lo - 1e-15 <= m <= hi + 1e-15:
            raise ValueError(f"mu = {m} outside [{lo}, {hi}]")
    norms = [rho_green_norm_mu(rho, float(m), R).norm for m in mu_grid]
    defects = []
    crit = delta_rw(1.0 / (2 * d), d, 1)
    for m in mu_grid:
        z = 2 * d * float(m)
        Gs = green_rw(float(m), d, n_max, n_max + 1, exact=False).G
        lhs = convolve(Gs, crit, n_max + 1)
        rhs = LatticeFunction.delta(d, n_max + 1)
        for n in range(1, n_max + 1):
            rhs = rhs - pn(d, n, exact=False) * ((1 - z) * z ** (n - 1))
        rhs = rhs - pn(d, n_max + 1, exact=False) * z**n_max
        defects.append(float(np.max(np.abs((lhs - rhs).values))))
    return UniformReport(list(map(float, mu_grid)), norms, max(norms), defects)


def certified_perturbation(d: int, beta: float, amplitude: float = 1.0, mass: float = 0.0, seed: int = 0) -> LatticeFunction:
    """Delta = Delta^rw_{1/(2d)} + beta * pi with pi symmetric on |x|_1 <= 2 and |pi(x)| <= |x|^{-d-4}.

    Off-origin values of pi are drawn per orbit from [-amplitude, amplitude]
    times |x|^{-d-4}; the origin value is set so that sum pi = mass, and the
    whole of pi is scaled down if that pushes |pi(0)| above 1. A nonnegative
    mass keeps mu <= 1/(2d).
    """
    if not 0 < amplitude <= 1:
        raise ValueError("amplitude must lie in (0, 1]")
    rng = np.random.Generator(np.random.Philox(seed))
    R = 2
    reps = orbit_reps(d, R)
    keep = reps.sum(axis=1) <= 2
    vals = np.zeros(len(reps))
    r = np.sqrt((reps.astype(np.float64) ** 2).sum(axis=1))
    for i in np.nonzero(keep)[0]:
        if r[i] > 0:
            vals[i] = amplitude * rng.uniform(-1.0, 1.0) * r[i] ** (-d - 4)
    pi = vals[orbit_index(d, R)].reshape((2 * R + 1,) * d)
    origin = (R,) * d
    pi[origin] = mass - math.fsum(pi.ravel())
    scale = max(1.0, abs(pi[origin]))
    pi /= scale
    return delta_rw(1.0 / (2 * d), d, R) + LatticeFunction(pi * beta, False)


@dataclass
class DeconvResult:
    G: LatticeFunction
    E: LatticeFunction
    report: dict = field(default_factory=dict)


def default_tolerance(d: int, R: int) -> float:
    """10 * machine epsilon * number of box cells."""
    return 10 * np.finfo(float).eps * (2 * R + 1) ** d


def deconvolve(Delta: LatticeFunction, beta: float, R: int, max_terms: int = 200, tol: float | None = None,
               require_certificate: bool = True) -> DeconvResult:
    """Construct G with Delta*G = delta_0 on the box of radius R.

    Delta*G^rw_mu is formed with G^rw_mu on the box enlarged by the support
    radius of Delta, so its values on the R-box carry no boundary error.
    ``report["residual"]`` is ||clip(f*g) - delta_0|| for f = Delta*G^rw_mu
    and its computed inverse g, recomputed by an explicit convolution;
    ``report["interior_residual"]`` is sup |Delta*G - delta_0| over the points
    where Delta*G only needs G inside the box.
    """
    d = Delta.d
    tol = default_tolerance(d, R) if tol is None else tol
    Delta = Delta.to_float()
    mu = float(choose_mu(Delta))
    cert = build_rho(Delta, mu, beta)
    if require_certificate and not cert.valid:
        raise CertificateError(
            f"certificate failed: symmetry={cert.symmetry_ok} zero_sum={cert.zero_sum_ok} decay={cert.decay_constant:.3g}"
        )
    rD = max(Delta.support_radius, 0)
    Gmu_big = green_function(mu, d, R + rD)
    f = convolve(Delta.compact(), Gmu_big, R)
    f.trunc = 0.0
    one = LatticeFunction.delta(d, 0)
    r = banach_norm(f - one)
    if r >= 2.0 ** (-d - 1):
        raise NotInvertibleError(f"||Delta*G_mu - delta_0|| = {r:.4g} >= 2^-(d+1); beta too large for this Delta")
    inv = neumann_invert(f, tol=tol, max_terms=max_terms, rmax=R)
    E = inv.inverse - one.with_radius(R)
    EG = convolve(E, Gmu_big, R)
    Gmu = Gmu_big.with_radius(R)
    G = Gmu + EG
    G.trunc = 0.0

    # what E*G_mu misses from G_mu beyond the enlarged box: at most sum_{|y|_inf > rD} |E(y)| times
    # G_mu just outside that box
    out_pt = [(R + rD + 1,) + (0,) * (d - 1)]
    g_out = float(green_at_points(mu, d, out_pt)[0])
    Ev = np.abs(E.values).copy()
    c = R
    Ev[tuple(slice(c - rD, c + rD + 1) for _ in range(d))] = 0.0
    missing = float(Ev.sum()) * g_out

    inner = R - rD
    DG = convolve(Delta.compact(), G, inner)
    direct = DG - one.with_radius(inner)
    Grw = critical_green(d, R)
    ratio = np.abs(G.values) / Grw.values
    imax = int(np.argmax(ratio))
    xmax = tuple(int(v) - R for v in np.unravel_index(imax, ratio.shape))
    rr = radii(d, R)
    EG_scaled = np.abs(EG.values) * np.where(rr > 0, rr, 1.0) ** (d - 2) / beta
    report = {
        "d": d,
        "R": R,
        "beta": beta,
        "mu": mu,
        "C2": cert.C2,
        "certificate_valid": cert.valid,
        "r": r,
        "neumann_terms": inv.terms,
        "tolerance": tol,
        "residual": inv.residual,
        "residual_ok": bool(inv.residual <= tol),
        "interior_residual": float(np.max(np.abs(direct.values))),
        "E_norm": inv.inverse_distance,
        "E_bound": inv.bound,
        "E_within_bound": bool(inv.within_bound),
        "max_ratio": float(ratio.flat[imax]),
        "argmax_ratio": list(xmax),
        "ratio_ok": bool(np.all(ratio <= 2.0)),
        "EG_constant": float(np.max(EG_scaled)),
        "convolution_truncation_estimate": missing,
        "ratio_profile": {int(k): v for k, v in _shell_max(ratio, rr).items()},
        "EG_profile": {int(k): v for k, v in _shell_max(EG_scaled, rr).items()},
    }
    return DeconvResult(G, E, report)


def _shell_max(values: np.ndarray, r: np.ndarray) -> dict:
    shells = np.rint(r).astype(np.int64)
    return {k: float(values[shells == k].max()) for k in range(int(shells.max()) + 1) if (shells == k).any()}


@dataclass(frozen=True)
class AsympReport:
    constant: float
    argmax: tuple


def green_asymp_check(Gsaw: LatticeFunction, Grw_mu: LatticeFunction, beta: float) -> AsympReport:
    """sup_x |Gsaw(x) - Grw_mu(x)| |x|^{d-2} / beta over the common box.

    At beta = 0 the unnormalised supremum is reported.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    R = min(Gsaw.rmax, Grw_mu.rmax)
    a = Gsaw.to_float().with_radius(R).values
    b = Grw_mu.to_float().with_radius(R).values
    rr = radii(Gsaw.d, R)
    scaled = np.abs(a - b) * np.where(rr > 0, rr, 1.0) ** (Gsaw.d - 2) / (beta if beta > 0 else 1.0)
    i = int(np.argmax(scaled))
    return AsympReport(float(scaled.flat[i]), tuple(int(v) - R for v in np.unravel_index(i, scaled.shape)))
