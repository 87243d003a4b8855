"""Run configuration, verification checks, and bootstrap and bubble diagnostics.

Every check returns a :class:`CheckResult`; :func:`verify_all` runs the
enabled ones and collects them into a :class:`VerificationReport`.

Randomness: all sampling uses ``numpy.random.Generator(numpy.random.Philox(seed))``.
Philox4x64-10 is a counter-based generator, so a stream is determined by the
64-bit seed alone and can be reproduced in any language that implements it.
Each check derives its own stream as ``Philox(seed).jumped(k)`` with a fixed
index ``k`` per check, so enabling or disabling one check does not change the
walks sampled by another.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from .expansion import ExpansionTable, enumerate_expansion, fixed_point_defect
from .lace import (
    IntervalGraph,
    J_bruteforce,
    J_via_laces,
    all_edges,
    check_KJ_identity,
    compatible_edges,
    enumerate_laces,
    is_connected,
    is_minimally_connected,
    lace_of,
)
from .lattice import LatticeFunction, banach_norm, convolve, neumann_invert
from .walks import (
    BudgetExceeded,
    CnTable,
    Walk,
    bootstrap_ratio,
    check_cn_submultiplicativity,
    enumerate_cn,
    estimate_lambda_c,
    susceptibility,
)
from .srw import critical_green, green_rw, radii

REPORT_SCHEMA = 1


class ConfigError(ValueError):
    pass


def parse_scalar(text, exact: bool):
    """'1/4', '0.25' or a number; exact mode keeps decimals as exact rationals."""
    if isinstance(text, (int, Fraction)) and exact:
        return Fraction(text)
    if isinstance(text, (int, float, Fraction)) and not exact:
        return float(text)
    try:
        return Fraction(str(text).strip()) if exact else float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"cannot parse number {text!r}") from None


@dataclass
class RunConfig:
    """Parameters of a run. Keys of the flat config file are the field names."""

    dim: int = 2
    beta: Fraction | float = Fraction(1, 4)
    lam: Fraction | float = Fraction(1, 10)
    lambda_grid: list = field(default_factory=list)
    nmax: int = 8
    Ncap: int = 8
    radius: int = 6
    mode: str = "exact"
    budget: int = 2 * 10**9
    seed: int = 20240601
    trials: int = 200
    out: str | None = None
    report: str | None = None
    figures: str | None = None

    def validate(self) -> "RunConfig":
        if self.mode not in ("exact", "float"):
            raise ConfigError(f"mode must be exact or float, not {self.mode!r}")
        exact = self.mode == "exact"
        self.beta = parse_scalar(self.beta, exact)
        self.lam = parse_scalar(self.lam, exact)
        self.lambda_grid = [parse_scalar(v, exact) for v in self.lambda_grid]
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if not 0 <= self.beta <= 1:
            raise ConfigError(f"beta = {self.beta} outside [0, 1]")
        if self.nmax < 0 or self.Ncap < 1 or self.radius < 0:
            raise ConfigError("nmax and radius must be >= 0 and Ncap >= 1")
        if self.budget <= 0:
            raise ConfigError("budget must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        return self

    @property
    def exact(self) -> bool:
        return self.mode == "exact"

    @classmethod
    def from_file(cls, path) -> dict:
        """Read ``key = value`` lines (``#`` comments) into a dict of overrides."""
        names = {f.name for f in fields(cls)} | {"lambda"}
        out = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in names:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out["lam" if key == "lambda" else key] = val
        return out

    @classmethod
    def build(cls, file_values: dict | None = None, overrides: dict | None = None) -> "RunConfig":
        """Defaults, then config-file values, then explicit overrides (flags win)."""
        merged = {}
        merged.update(file_values or {})
        merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
        kwargs = {}
        types = {f.name: f.type for f in fields(cls)}
        for k, v in merged.items():
            if k not in types:
                raise ConfigError(f"unknown setting {k!r}")
            if k in ("dim", "nmax", "Ncap", "radius", "budget", "seed", "trials"):
                try:
                    v = int(v)
                except ValueError:
                    raise ConfigError(f"{k} must be an integer, got {v!r}") from None
            elif k == "lambda_grid" and isinstance(v, str):
                v = [s for s in v.replace(",", " ").split() if s]
            kwargs[k] = v
        return cls(**kwargs).validate()

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("beta", "lam"):
            d[k] = str(d[k])
        d["lambda_grid"] = [str(v) for v in self.lambda_grid]
        return d


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    bitgen = np.random.Philox(seed)
    if stream:
        bitgen = bitgen.jumped(stream)
    return np.random.Generator(bitgen)


def random_walk(rng: np.random.Generator, d: int, n: int) -> Walk:
    return Walk.from_steps(d, rng.integers(0, 2 * d, size=n).tolist())


# reports


@dataclass
class CheckResult:
    name: str
    status: str  # pass, fail or incomplete
    margins: dict = field(default_factory=dict)
    witness: object = None
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, Walk):
        return [list(p) for p in v.points]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


@dataclass
class VerificationReport:
    config: dict
    checks: list = field(default_factory=list)

    @property
    def incomplete(self) -> bool:
        return any(c.status == "incomplete" for c in self.checks)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def exit_code(self) -> int:
        if any(c.status == "fail" for c in self.checks):
            return 1
        if self.incomplete:
            return 3
        return 0

    def status_vector(self) -> list[tuple[str, str]]:
        return [(c.name, c.status) for c in self.checks]

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "config": _jsonable(self.config),
            "complete": not self.incomplete,
            "passed": self.all_passed,
            "checks": [
                {
                    "name": c.name,
                    "status": c.status,
                    "margins": _jsonable(c.margins),
                    "witness": _jsonable(c.witness),
                    "runtime_s": round(c.runtime, 3),
                }
                for c in sorted(self.checks, key=lambda c: c.name)
            ],
        }

    def write(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def _timed(name: str, fn, *args, **kwargs) -> CheckResult:
    t0 = time.perf_counter()
    try:
        res = fn(*args, **kwargs)
    except BudgetExceeded as e:
        res = CheckResult(name, "incomplete", {"reason": str(e)})
    res.name = name
    res.runtime = time.perf_counter() - t0
    return res


def _equal(a, b, exact: bool) -> bool:
    if exact:
        return a == b
    return abs(float(a) - float(b)) <= 1e-12 * max(1.0, abs(float(a)), abs(float(b)))


# identity checks


def check_kj(beta, walks, exact: bool = True, flip_sign_N: int | None = None) -> CheckResult:
    """K[0,n] = K[1,n] + sum_m J[0,m] K[m,n] on every given walk."""
    worst = 0.0
    for g in walks:
        if len(g) < 1:
            continue
        rep = check_KJ_identity(g, beta, flip_sign_N=flip_sign_N)
        if not _equal(rep.lhs, rep.rhs, exact):
            return CheckResult("kj_identity", "fail", {"walks": len(walks), "lhs": rep.lhs, "rhs": rep.rhs}, g)
        worst = max(worst, abs(float(rep.lhs - rep.rhs)))
    return CheckResult("kj_identity", "pass", {"walks": len(walks), "max_abs_defect": worst})


def all_walks(d: int, n: int):
    for steps in itertools.product(range(2 * d), repeat=n):
        yield Walk.from_steps(d, steps)


def kj_walk_set(d_exhaustive: int, n_exhaustive: int, d_random: int, n_random: int, trials: int, rng) -> list[Walk]:
    walks = [w for n in range(1, n_exhaustive + 1) for w in all_walks(d_exhaustive, n)]
    for _ in range(trials):
        walks.append(random_walk(rng, d_random, int(rng.integers(1, n_random + 1))))
    return walks


def check_lace_equivalence(beta, walks, max_length: int = 6, exact: bool = True) -> CheckResult:
    """J_bruteforce = J_via_laces on every subinterval of length <= max_length."""
    count = 0
    for g in walks:
        n = len(g)
        for a in range(n + 1):
            for b in range(a + 1, min(n, a + max_length) + 1):
                jb = J_bruteforce(g, a, b, beta, max_length)
                jl, _ = J_via_laces(g, a, b, beta)
                count += 1
                if not _equal(jb, jl, exact):
                    return CheckResult("lace_equivalence", "fail", {"intervals": count, "a": a, "b": b, "brute": jb, "laces": jl}, g)
    return CheckResult("lace_equivalence", "pass", {"intervals": count, "walks": len(walks)})


def check_lace_soundness(max_length: int = 5) -> CheckResult:
    """Exhaustive idempotence and projection property for intervals [0, L], L <= max_length."""
    graphs = 0
    for L in range(1, max_length + 1):
        edges = all_edges(0, L)
        laces = [lc for N in range(1, L + 1) for lc in enumerate_laces(N, 0, L)]
        compat = {lc: compatible_edges(lc) for lc in laces}
        for lc in laces:
            if lace_of(lc.graph) != lc or not is_minimally_connected(lc.graph):
                return CheckResult("lace_soundness", "fail", {"length": L, "reason": "not idempotent"}, list(lc.elements))
        for bits in range(1, 1 << len(edges)):
            es = frozenset(e for i, e in enumerate(edges) if bits >> i & 1)
            G = IntervalGraph(0, L, es)
            if not is_connected(G):
                continue
            graphs += 1
            got = lace_of(G)
            if not is_minimally_connected(got.graph) or not got.edges <= es:
                return CheckResult("lace_soundness", "fail", {"length": L, "reason": "extracted graph is not a sub-lace"}, sorted(es))
            for lc in laces:
                predicted = lc.edges <= es and (es - lc.edges) <= compat[lc]
                if predicted != (got == lc):
                    return CheckResult(
                        "lace_soundness", "fail", {"length": L, "reason": "projection property"}, {"graph": sorted(es), "lace": list(lc.elements)}
                    )
    return CheckResult("lace_soundness", "pass", {"connected_graphs": graphs, "max_length": max_length})


def _series_max_abs(s) -> float:
    vals = s.coeffs.ravel().tolist()
    return float(max((abs(v) for v in vals), default=0))


def check_fixed_point(d: int, betas, n_max: int, N_cap: int, table: ExpansionTable | None = None, exact: bool = True) -> CheckResult:
    """Every lambda-coefficient of G^saw * Delta^saw - delta_0 vanishes up to n_max."""
    table = table or enumerate_expansion(d, n_max)
    margins = {}
    for b in betas:
        defect = fixed_point_defect(d, b, n_max, N_cap, table)
        if exact:
            bad = defect.nonzero_degrees()
            margins[str(b)] = "zero" if not bad else f"nonzero at degrees {bad}"
            if bad:
                return CheckResult("fixed_point", "fail", margins, {"beta": b, "degrees": bad})
        else:
            m = _series_max_abs(defect)
            margins[str(b)] = m
            if m > 1e-10:
                return CheckResult("fixed_point", "fail", margins, {"beta": b, "max_abs": m})
    return CheckResult("fixed_point", "pass", margins)


def check_pi_structure(d: int, betas, n_max: int, table: ExpansionTable | None = None) -> CheckResult:
    """Pi^(1) lives on the origin and Pi^(2)_n(x) <= beta^2 [lambda^n] G^saw(x)^3, coefficient-wise.

    Coefficient-wise domination implies the pointwise bound at every
    lambda >= 0 for the truncated functions.
    """
    table = table or enumerate_expansion(d, n_max)
    R = n_max
    margins = {}
    for b in betas:
        p1 = table.pi_series(1, b).coeffs.copy()
        p1[(slice(None),) + (R,) * d] = 0
        off = [v for v in p1.ravel().tolist() if v != 0]
        if off:
            return CheckResult("pi_structure", "fail", {"beta": b, "reason": "Pi^(1) nonzero off the origin"})
        G = table.c_series(b)
        # cube pointwise in x, product in lambda
        g = G.coeffs
        n1 = n_max + 1
        cube = np.empty_like(g)
        cube.fill(0)
        sq = np.empty_like(g)
        sq.fill(0)
        for i in range(n1):
            for j in range(n1 - i):
                sq[i + j] = sq[i + j] + g[i] * g[j]
        for i in range(n1):
            for j in range(n1 - i):
                cube[i + j] = cube[i + j] + sq[i] * g[j]
        p2 = table.pi_series(2, b).coeffs
        slack = cube * (Fraction(b) ** 2 if isinstance(b, (int, Fraction)) else b**2) - p2
        vals = slack.ravel().tolist()
        k = min(range(len(vals)), key=lambda i: vals[i])
        if vals[k] < 0:
            idx = np.unravel_index(k, slack.shape)
            return CheckResult("pi_structure", "fail", {"beta": b}, {"degree": int(idx[0]), "x": [int(c) - R for c in idx[1:]]})
        tight = [v for v, q in zip(vals, p2.ravel().tolist()) if q != 0]
        margins[str(b)] = {"min_slack_where_pi2_nonzero": min(tight) if tight else None}
    return CheckResult("pi_structure", "pass", margins)


def check_cn(table: CnTable, betas) -> CheckResult:
    """Cut-at-each-step inequality for c_n pointwise and summed; the form without the step kernel is reported."""
    margins = {}
    for b in betas:
        rows = check_cn_submultiplicativity(table, b)
        for r in rows:
            if not (r.pointwise_ok and r.summed_ok):
                return CheckResult("cn_submultiplicativity", "fail", {"beta": b, "n": r.n}, r.witness)
        margins[str(b)] = {
            "n_range": [rows[0].n, rows[-1].n],
            "min_pointwise_slack": min(r.pointwise_slack for r in rows),
            "literal_form_fails_at_n": [r.n for r in rows if not r.literal_ok],
        }
    return CheckResult("cn_submultiplicativity", "pass", margins)


def check_susceptibility(table: CnTable, beta, grid, h) -> CheckResult:
    """Central differences of chi against 2d chi^2 on a lambda grid."""
    d = table.d
    rows = []
    for lam in grid:
        deriv = (susceptibility(d, beta, lam + h, table.n_max, table) - susceptibility(d, beta, lam - h, table.n_max, table)) / (2 * h)
        chi = susceptibility(d, beta, lam, table.n_max, table)
        rows.append((lam, deriv, 2 * d * chi * chi - deriv))
    worst = min(rows, key=lambda r: r[2])
    status = "pass" if worst[2] >= 0 else "fail"
    return CheckResult(
        "susceptibility_inequality",
        status,
        {"points": len(rows), "min_margin": worst[2], "at_lambda": worst[0], "margins": [float(r[2]) for r in rows]},
        None if status == "pass" else {"lambda": worst[0]},
    )


def susceptibility_grid(exact: bool = True, points: int = 20, top=Fraction(1, 5)):
    """Midpoints of ``points`` equal cells of [0, top], with step h = top / (20 points)."""
    grid = [top * Fraction(2 * k + 1, 2 * points) for k in range(points)]
    h = top / (20 * points)
    if exact:
        return grid, h
    return [float(g) for g in grid], float(h)


def random_sparse(rng, d: int, radius: int, max_points: int) -> LatticeFunction:
    k = int(rng.integers(1, max_points + 1))
    pts = {}
    for _ in range(k):
        x = tuple(int(c) for c in rng.integers(-radius, radius + 1, size=d))
        pts[x] = pts.get(x, 0.0) + float(rng.normal())
    return LatticeFunction.from_points(d, radius, pts)


def check_norm_submultiplicativity(d: int, pairs: int, rng, radius: int = 3, max_points: int = 8) -> CheckResult:
    """||f*g|| <= 2^{d+1} ||f|| ||g|| for random sparse f, g, convolved without clipping."""
    c = 2.0 ** (d + 1)
    worst = math.inf
    worst_ratio = 0.0
    for _ in range(pairs):
        f = random_sparse(rng, d, radius, max_points)
        g = random_sparse(rng, d, radius, max_points)
        fg = convolve(f, g, 2 * radius)
        lhs, rhs = banach_norm(fg), c * banach_norm(f) * banach_norm(g)
        worst = min(worst, rhs - lhs)
        worst_ratio = max(worst_ratio, lhs / (banach_norm(f) * banach_norm(g)))
        if lhs > rhs * (1 + 1e-12):
            return CheckResult("norm_submultiplicativity", "fail", {"lhs": lhs, "rhs": rhs}, {"f": list(f.items()), "g": list(g.items())})
    return CheckResult("norm_submultiplicativity", "pass", {"pairs": pairs, "max_ratio": worst_ratio, "constant": c})


def check_neumann(d: int, trials: int, rng, radius: int = 4, tol: float = 1e-12, residual_max: float = 1e-10) -> CheckResult:
    """Invert delta_0 + h with ||h|| <= 0.4 * 2^{-d-1}; residual and Neumann bound must hold."""
    limit = 0.4 * 2.0 ** (-d - 1)
    worst_res = 0.0
    worst_gap = math.inf
    for _ in range(trials):
        h = random_sparse(rng, d, 2, 6)
        target = float(rng.uniform(0.0, limit))
        h = h * (target / banach_norm(h))
        f = LatticeFunction.delta(d, 2) + h
        res = neumann_invert(f, tol=tol, rmax=radius)
        worst_res = max(worst_res, res.residual)
        worst_gap = min(worst_gap, res.bound - res.inverse_distance)
        if res.residual > residual_max or not res.within_bound:
            return CheckResult("neumann_contract", "fail", {"residual": res.residual, "distance": res.inverse_distance, "bound": res.bound},
                               list(h.items()))
    return CheckResult("neumann_contract", "pass", {"trials": trials, "max_residual": worst_res, "min_bound_gap": worst_gap})


def check_symmetry(table: ExpansionTable, beta) -> CheckResult:
    """Pi^(N) and c_n are invariant under the lattice symmetries, coefficient by coefficient."""
    from .symmetry import symmetry_defect

    for N in table.N_values:
        s = table.pi_series(N, beta)
        for n in range(s.n_max + 1):
            if symmetry_defect(s.coeffs[n]) != 0:
                return CheckResult("symmetry", "fail", {"N": N, "degree": n})
    c = table.c_series(beta)
    for n in range(c.n_max + 1):
        if symmetry_defect(c.coeffs[n]) != 0:
            return CheckResult("symmetry", "fail", {"c_n": n})
    return CheckResult("symmetry", "pass", {"N_values": table.N_values})


# diagnostics


def reference_green(d: int, R: int, n_max: int) -> LatticeFunction:
    """Critical G^rw on the box; for d <= 2, where it diverges, the series truncated at n_max."""
    if d >= 3:
        return critical_green(d, R)
    return green_rw(1.0 / (2 * d), d, n_max, R, exact=False).G


@dataclass(frozen=True)
class BootstrapRow:
    lam: float
    f: float
    argmax: tuple
    forbidden: bool


def bootstrap_scan(config: RunConfig, Grw: LatticeFunction | None = None, table: CnTable | None = None) -> list[BootstrapRow]:
    """f(lambda) = max_x G^saw_lambda(x)/G^rw(x) along the lambda grid.

    G^rw is the critical random-walk Green's function on the box of radius
    min(radius, nmax). Without an explicit ``lambda_grid`` the grid is 11
    points from 0 to 0.8 times the ratio-test estimate of lambda_c. The walk
    table is enumerated in float mode at the configured beta since the scan
    is a floating-point diagnostic. Rows with f in (2, 3] are flagged: the
    continuity argument forbids that range, so a hit means the truncation is
    too coarse.
    """
    d = config.dim
    beta = float(config.beta)
    if table is None:
        table = enumerate_cn(d, config.nmax, beta, budget=config.budget, mode="float")
    if Grw is None:
        Grw = reference_green(d, min(config.radius, config.nmax), config.nmax)
    if config.lambda_grid:
        grid = [float(v) for v in config.lambda_grid]
    else:
        top = 0.8 * estimate_lambda_c(table, beta)
        grid = [top * k / 10 for k in range(11)]
    rows = []
    for lam in grid:
        f, x = bootstrap_ratio(d, beta, lam, config.nmax, Grw, table)
        rows.append(BootstrapRow(lam, f, x, 2 < f <= 3))
    return rows


@dataclass(frozen=True)
class BubbleReport:
    value: float
    shell_sums: dict
    shell_exponent: float
    converging: bool


def bubble_diagram(G: LatticeFunction) -> BubbleReport:
    """sum_x G(x)^2 with per-shell contributions and their fitted decay exponent.

    Shell k collects the points with round(|x|) = k, for shells fully inside
    the box. The exponent is a least-squares slope of log(shell sum) against
    log k over the outer half of the complete shells; below -1 the shell
    series converges.
    """
    Gf = G.to_float()
    sq = Gf.values**2
    value = float(math.fsum(sq.ravel()))
    r = radii(G.d, G.rmax)
    shells = np.rint(r).astype(np.int64)
    complete = G.rmax  # shells up to the box radius are not cut by the box
    sums = {k: float(sq[shells == k].sum()) for k in range(0, complete + 1)}
    ks = np.array([k for k in sums if k >= max(2, complete // 2) and sums[k] > 0], dtype=float)
    if len(ks) >= 2:
        slope = float(np.polyfit(np.log(ks), np.log([sums[int(k)] for k in ks]), 1)[0])
    else:
        slope = float("nan")
    return BubbleReport(value, sums, slope, bool(slope < -1))


# orchestration


def verify_all(config: RunConfig, flip_sign_N: int | None = None, include_heavy: bool = False) -> VerificationReport:
    """Run every identity check at the configured size.

    ``flip_sign_N`` injects a sign error into J^(N) (mutation test); the
    KJ-identity check must then fail with a witness walk. ``include_heavy``
    adds the d=5 norm and Neumann checks.
    """
    d = config.dim
    exact = config.exact
    beta = config.beta
    report = VerificationReport(config.to_dict())
    walks_kj = kj_walk_set(1, min(6, config.nmax), d, max(1, min(10, config.nmax)), config.trials, rng_for(config.seed, 1))
    report.checks.append(_timed("kj_identity", check_kj, beta, walks_kj, exact, flip_sign_N))
    rng = rng_for(config.seed, 2)
    walks_eq = [random_walk(rng, d, int(rng.integers(1, max(1, config.nmax) + 1))) for _ in range(config.trials)]
    report.checks.append(_timed("lace_equivalence", check_lace_equivalence, beta, walks_eq, 6, exact))
    report.checks.append(_timed("lace_soundness", check_lace_soundness, 5))

    def expansion_checks():
        table = enumerate_expansion(d, config.nmax, config.budget)
        out = [
            _timed("fixed_point", check_fixed_point, d, [beta], config.nmax, config.Ncap, table, exact),
            _timed("pi_structure", check_pi_structure, d, [beta], config.nmax, table),
            _timed("symmetry", check_symmetry, table, beta),
        ]
        return out

    try:
        report.checks.extend(expansion_checks())
    except BudgetExceeded as e:
        for name in ("fixed_point", "pi_structure", "symmetry"):
            report.checks.append(CheckResult(name, "incomplete", {"reason": str(e)}))

    try:
        cn = enumerate_cn(d, config.nmax, None if exact else float(beta), budget=config.budget,
                          mode="polynomial" if exact else "float")
        betas_cn = sorted({Fraction(0), Fraction(1, 2), Fraction(1), beta}) if exact else [beta]
        report.checks.append(_timed("cn_submultiplicativity", check_cn, cn, betas_cn))
        grid, h = susceptibility_grid(exact)
        report.checks.append(_timed("susceptibility_inequality", check_susceptibility, cn, beta, grid, h))
    except BudgetExceeded as e:
        for name in ("cn_submultiplicativity", "susceptibility_inequality"):
            report.checks.append(CheckResult(name, "incomplete", {"reason": str(e)}))

    if include_heavy:
        report.checks.append(_timed("norm_submultiplicativity", check_norm_submultiplicativity, 5, config.trials, rng_for(config.seed, 3)))
        report.checks.append(_timed("neumann_contract", check_neumann, 5, max(1, config.trials // 10), rng_for(config.seed, 4)))
    report.checks.sort(key=lambda c: c.name)
    return report
