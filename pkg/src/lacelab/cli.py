"""Command-line entry point.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
3 work budget exceeded (partial output).

Settings are resolved as defaults, then ``--config FILE`` (flat
``key = value`` lines using the flag names without dashes), then flags.
Figures are written next to ``--out`` unless ``--figures DIR`` says
otherwise or ``--no-figures`` is given.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .deconv import CertificateError, certified_perturbation, deconvolve
from .expansion import enumerate_expansion, pi_N
from .harness import (
    ConfigError,
    RunConfig,
    VerificationReport,
    _jsonable,
    _timed,
    bootstrap_scan,
    bubble_diagram,
    check_fixed_point,
    check_kj,
    check_lace_equivalence,
    check_lace_soundness,
    check_pi_structure,
    check_symmetry,
    kj_walk_set,
    parse_scalar,
    random_walk,
    reference_green,
    rng_for,
    verify_all,
)
from .io import CacheFormatError, cached_lattice, read_lattice, write_lattice, write_series, write_table
from .lattice import LatticeFunction, NotInvertibleError
from .srw import critical_green, green_function, green_rw, pn
from .walks import BudgetExceeded, enumerate_cn

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3

_CONFIG_KEYS = ("dim", "beta", "lam", "nmax", "Ncap", "radius", "mode", "budget", "seed", "trials", "out", "report", "figures")


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--dim", type=int, help="lattice dimension d")
    g.add_argument("--beta", help="interaction strength in [0,1], e.g. 1/4 or 0.25")
    g.add_argument("--lambda", dest="lam", help="fugacity lambda")
    g.add_argument("--nmax", type=int, help="walk length / series degree cap")
    g.add_argument("--Ncap", type=int, help="largest lace size N kept")
    g.add_argument("--radius", type=int, help="box radius R")
    g.add_argument("--mode", choices=["exact", "float"], help="arithmetic mode")
    g.add_argument("--budget", type=int, help="path-count cap for enumerations")
    g.add_argument("--seed", type=int, help="64-bit seed for sampled walks")
    g.add_argument("--trials", type=int, help="number of sampled walks or pairs")
    g.add_argument("--config", help="flat key = value settings file")
    g.add_argument("--out", help="output CSV")
    g.add_argument("--report", help="output JSON report")
    g.add_argument("--figures", help="directory for PNG figures (default: next to --out)")
    g.add_argument("--no-figures", action="store_true", help="skip figure output")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lacelab", description="Weakly self-avoiding walk lace-expansion toolkit")
    parser.add_argument("--version", action="version", version=f"lacelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = [_global_flags()]

    p = sub.add_parser("srw-green", parents=common, help="random-walk Green's function G^rw_mu on a box")
    p.add_argument("--mu", help="step weight mu in [-1/(4d), 1/(2d)] (default 1/(2d))")

    p = sub.add_parser("wsaw-green", parents=common, help="truncated weakly self-avoiding walk Green's function")
    p.add_argument("--series", action="store_true", help="write the lambda-series coefficients instead of one lambda")

    sub.add_parser("pi-coefficients", parents=common, help="Pi^(N)(x) at lambda for N <= Ncap")
    sub.add_parser("verify-identities", parents=common, help="KJ, lace and fixed-point identity checks")

    p = sub.add_parser("deconvolve", parents=common, help="build G with Delta*G = delta_0")
    p.add_argument("--input", help="Delta as a lattice CSV (default: a seeded certified perturbation)")
    p.add_argument("--amplitude", type=float, default=1.0, help="perturbation amplitude when no --input is given")

    sub.add_parser("bootstrap-scan", parents=common, help="f(lambda) = max G^saw/G^rw along a lambda grid").add_argument(
        "--lambda-grid", help="comma separated lambda values"
    )

    p = sub.add_parser("bubble", parents=common, help="bubble diagram sum G(x)^2 with shell sums")
    p.add_argument("--input", help="G as a lattice CSV (default: critical G^rw on the box)")

    p = sub.add_parser("verify-all", parents=common, help="every identity and property check")
    p.add_argument("--heavy", action="store_true", help="add the d=5 norm and Neumann checks")
    p.add_argument("--mutate", type=int, metavar="N", help="flip the sign of J^(N) (negative control)")
    return parser


_DEFAULTS = {
    "srw-green": {"dim": 5, "radius": 6},
    "wsaw-green": {"dim": 2, "nmax": 8, "lam": "1/10"},
    "pi-coefficients": {"dim": 2, "nmax": 8, "Ncap": 4, "lam": "1/10"},
    "verify-identities": {},
    "deconvolve": {"dim": 5, "beta": "0.01", "radius": 5, "nmax": 200, "mode": "float"},
    "bootstrap-scan": {"dim": 2, "nmax": 10, "radius": 5, "beta": "0.2"},
    "bubble": {"dim": 5, "radius": 10},
    "verify-all": {},
}


def resolve_config(args) -> RunConfig:
    file_values = RunConfig.from_file(args.config) if args.config else {}
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    if getattr(args, "lambda_grid", None):
        overrides["lambda_grid"] = args.lambda_grid
    merged = dict(_DEFAULTS.get(args.command, {}))
    merged.update(file_values)
    return RunConfig.build(merged, overrides)


def _figure_path(cfg: RunConfig, args, suffix: str) -> Path | None:
    if args.no_figures:
        return None
    if cfg.figures:
        stem = Path(cfg.out).stem if cfg.out else args.command
        return Path(cfg.figures) / f"{stem}_{suffix}.png"
    if cfg.out:
        out = Path(cfg.out)
        return out.with_name(f"{out.stem}_{suffix}.png")
    return None


def _emit_report(cfg: RunConfig, payload: dict) -> None:
    text = json.dumps(_jsonable(payload), indent=2, default=str) + "\n"
    if cfg.report:
        Path(cfg.report).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.report).write_text(text)
    else:
        sys.stdout.write(text)


def _key(v) -> str:
    return str(v).replace("/", "-")


# subcommands


def _srw_series(mu, d: int, n_max: int, R: int) -> LatticeFunction:
    """sum_n (2d mu)^n p_n with each p_n read from (or written to) the cache."""
    z = 2 * d * Fraction(mu)
    acc = LatticeFunction.zeros(d, R, exact=True)
    for n in range(n_max + 1):
        p = cached_lattice(f"pn_d{d}_n{n}.csv", lambda n=n: pn(d, n, exact=True))
        acc = acc + p.with_radius(R) * z**n
    acc.trunc = 0.0
    return acc


def cmd_srw_green(cfg: RunConfig, args) -> int:
    d, R = cfg.dim, cfg.radius
    mu = parse_scalar(args.mu if args.mu is not None else Fraction(1, 2 * d), cfg.exact)
    series = args.nmax is not None or (args.config and "nmax" in RunConfig.from_file(args.config))
    if not series:
        G = green_function(float(mu), d, R)
        info = {"method": "bessel-integral", "mu": float(mu)}
    elif cfg.exact and (2 * cfg.nmax + 1) ** d <= 2_000_000:
        G = _srw_series(mu, d, cfg.nmax, R)
        info = {"method": "series", "mu": str(mu), "nmax": cfg.nmax}
    else:
        gs = green_rw(mu, d, cfg.nmax, R)
        G = gs.G
        info = {"method": "series", "mu": str(mu), "nmax": cfg.nmax, "tail": gs.tail, "tail_rigorous": gs.tail_rigorous}
    info["G0"] = float(G[(0,) * d])
    if cfg.out:
        write_lattice(cfg.out, G)
    fig = _figure_path(cfg, args, "radial")
    if fig:
        from .plotting import radial_plot

        radial_plot(G, fig, f"G^rw, d={d}, mu={float(mu):.4g}", power=d - 2)
    _emit_report(cfg, info)
    return EXIT_OK


def _cn_functions(cfg: RunConfig):
    d, n_max = cfg.dim, cfg.nmax
    names = [f"cn_d{d}_n{n}_{cfg.mode}_b{_key(cfg.beta)}.csv" for n in range(n_max + 1)]
    from .io import cache_dir

    if all((cache_dir() / nm).exists() for nm in names):
        return [read_lattice(cache_dir() / nm) for nm in names], None
    table = enumerate_cn(d, n_max, cfg.beta, budget=cfg.budget, mode="polynomial" if cfg.exact else "float")
    cs = [table.c(n, cfg.beta) for n in range(n_max + 1)]
    for nm, c in zip(names, cs):
        write_lattice(cache_dir() / nm, c)
    return cs, table


def cmd_wsaw_green(cfg: RunConfig, args) -> int:
    d = cfg.dim
    cs, table = _cn_functions(cfg)
    if args.series:
        if not cfg.exact:
            raise ConfigError("--series needs --mode exact")
        from .lattice import SeriesFunction

        side = 2 * cfg.nmax + 1
        arr = np.empty((cfg.nmax + 1,) + (side,) * d, dtype=object)
        for n, c in enumerate(cs):
            arr[n] = c.with_radius(cfg.nmax).values
        S = SeriesFunction(arr, cfg.nmax)
        if cfg.out:
            write_series(cfg.out, S)
        _emit_report(cfg, {"nmax": cfg.nmax, "totals": [str(c.total()) for c in cs]})
        return EXIT_OK
    lam = cfg.lam
    G = LatticeFunction.zeros(d, cfg.nmax, cfg.exact)
    for c in reversed(cs):
        G = G * lam + c.with_radius(cfg.nmax)
    G.trunc = 0.0
    if cfg.out:
        write_lattice(cfg.out, G)
    fig = _figure_path(cfg, args, "radial")
    if fig:
        from .plotting import radial_plot

        R = min(cfg.nmax, 6)
        radial_plot(G.with_radius(R), fig, f"G^saw, d={d}, beta={cfg.beta}, lambda={lam}", reference=reference_green(d, R, cfg.nmax))
    _emit_report(cfg, {"G0": str(G[(0,) * d]), "total": str(G.total())})
    return EXIT_OK


def cmd_pi_coefficients(cfg: RunConfig, args) -> int:
    d = cfg.dim
    table = enumerate_expansion(d, cfg.nmax, cfg.budget)
    beta = cfg.beta
    lam = cfg.lam
    rows = []
    norms = {}
    for N in range(1, cfg.Ncap + 1):
        P = pi_N(d, beta, lam, N, cfg.nmax, table)
        norms[N] = float(P.to_float().l1())
        for x, v in P.items():
            rows.append([N, *x, v])
    cols = ["N"] + [f"x{i + 1}" for i in range(d)] + ["value"]
    if cfg.out:
        write_table(cfg.out, cols, rows)
    fig = _figure_path(cfg, args, "norms")
    if fig:
        from .plotting import series_plot

        Ns = sorted(k for k in norms if norms[k] > 0)
        series_plot(Ns, [norms[k] for k in Ns], fig, "N", "l1 norm of Pi^(N)", f"d={d}, beta={beta}, lambda={lam}", logy=True)
    _emit_report(cfg, {"l1_norms": norms, "rows": len(rows)})
    return EXIT_OK


def identity_report(cfg: RunConfig) -> VerificationReport:
    """The identity subset of verify-all: KJ, lace equivalence and soundness, fixed point, Pi structure, symmetry."""
    rep = VerificationReport(cfg.to_dict())
    walks = kj_walk_set(1, min(6, cfg.nmax), cfg.dim, max(1, min(10, cfg.nmax)), cfg.trials, rng_for(cfg.seed, 1))
    rep.checks.append(_timed("kj_identity", check_kj, cfg.beta, walks, cfg.exact))
    rng = rng_for(cfg.seed, 2)
    walks_eq = [random_walk(rng, cfg.dim, int(rng.integers(1, max(1, cfg.nmax) + 1))) for _ in range(cfg.trials)]
    rep.checks.append(_timed("lace_equivalence", check_lace_equivalence, cfg.beta, walks_eq, 6, cfg.exact))
    rep.checks.append(_timed("lace_soundness", check_lace_soundness, 5))
    table = enumerate_expansion(cfg.dim, cfg.nmax, cfg.budget)
    rep.checks.append(_timed("fixed_point", check_fixed_point, cfg.dim, [cfg.beta], cfg.nmax, cfg.Ncap, table, cfg.exact))
    rep.checks.append(_timed("pi_structure", check_pi_structure, cfg.dim, [cfg.beta], cfg.nmax, table))
    rep.checks.append(_timed("symmetry", check_symmetry, table, cfg.beta))
    rep.checks.sort(key=lambda c: c.name)
    return rep


def cmd_verify_identities(cfg: RunConfig, args) -> int:
    rep = identity_report(cfg)
    _emit_report(cfg, rep.to_dict())
    return rep.exit_code()


def cmd_verify_all(cfg: RunConfig, args) -> int:
    rep = verify_all(cfg, flip_sign_N=args.mutate, include_heavy=args.heavy)
    _emit_report(cfg, rep.to_dict())
    return rep.exit_code()


def cmd_deconvolve(cfg: RunConfig, args) -> int:
    d, R = cfg.dim, cfg.radius
    beta = float(cfg.beta)
    if args.input:
        Delta = read_lattice(args.input)
        if Delta.d != d and args.dim is not None:
            raise ConfigError(f"--dim {d} does not match the input (d={Delta.d})")
    else:
        Delta = certified_perturbation(d, beta, args.amplitude, seed=cfg.seed)
    t0 = time.perf_counter()
    try:
        res = deconvolve(Delta, beta, R, max_terms=cfg.nmax)
    except (CertificateError, NotInvertibleError) as e:
        _emit_report(cfg, {"status": "fail", "reason": str(e)})
        return EXIT_FAIL
    report = dict(res.report)
    report["runtime_s"] = round(time.perf_counter() - t0, 3)
    ok = report["residual_ok"] and report["ratio_ok"] and report["E_within_bound"]
    report["status"] = "pass" if ok else "fail"
    if cfg.out:
        write_lattice(cfg.out, res.G)
    fig = _figure_path(cfg, args, "profiles")
    if fig:
        from .plotting import profile_plot

        profile_plot({"G/G^rw": report["ratio_profile"], "|E*G_mu| |x|^(d-2)/beta": report["EG_profile"]}, fig, "shell max",
                     f"d={d}, beta={beta}, R={R}")
    _emit_report(cfg, report)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bootstrap_scan(cfg: RunConfig, args) -> int:
    rows = bootstrap_scan(cfg)
    d = cfg.dim
    cols = ["lambda", "f"] + [f"argmax_x{i + 1}" for i in range(d)] + ["forbidden"]
    if cfg.out:
        write_table(cfg.out, cols, [[r.lam, r.f, *r.argmax, int(r.forbidden)] for r in rows])
    fig = _figure_path(cfg, args, "f")
    if fig:
        from .plotting import series_plot

        series_plot([r.lam for r in rows], [r.f for r in rows], fig, "lambda", "f(lambda)", f"d={d}, beta={cfg.beta}", hlines=(2, 3))
    flagged = [r.lam for r in rows if r.forbidden]
    _emit_report(cfg, {"rows": len(rows), "max_f": max(r.f for r in rows), "flagged_lambdas": flagged})
    return EXIT_FAIL if flagged else EXIT_OK


def cmd_bubble(cfg: RunConfig, args) -> int:
    G = read_lattice(args.input) if args.input else critical_green(cfg.dim, cfg.radius)
    b = bubble_diagram(G)
    cum = 0.0
    rows = []
    for k in sorted(b.shell_sums):
        cum += b.shell_sums[k]
        rows.append([k, b.shell_sums[k], cum])
    if cfg.out:
        write_table(cfg.out, ["shell", "sum", "cumulative"], rows)
    fig = _figure_path(cfg, args, "shells")
    if fig:
        from .plotting import series_plot

        ks = [r[0] for r in rows if r[0] > 0 and r[1] > 0]
        series_plot(ks, [b.shell_sums[k] for k in ks], fig, "shell", "sum of G^2 on shell", f"d={G.d}", logy=True)
    _emit_report(cfg, {"value": b.value, "shell_exponent": b.shell_exponent, "converging": b.converging})
    return EXIT_OK


COMMANDS = {
    "srw-green": cmd_srw_green,
    "wsaw-green": cmd_wsaw_green,
    "pi-coefficients": cmd_pi_coefficients,
    "verify-identities": cmd_verify_identities,
    "deconvolve": cmd_deconvolve,
    "bootstrap-scan": cmd_bootstrap_scan,
    "bubble": cmd_bubble,
    "verify-all": cmd_verify_all,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, CacheFormatError, FileNotFoundError) as e:
        print(f"lacelab: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as e:
        print(f"lacelab: budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
