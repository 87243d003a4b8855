"""Flat-file cache format for lattice functions and series, plus CSV table output.

A cache file starts with ``#``-prefixed ``key=value`` header lines::

    # lacelab-lattice
    # version=1
    # d=2
    # rmax=3
    # mode=exact
    # trunc=0.0

followed by a CSV header row and one row per nonzero value, in lexicographic
order of the point. Lattice rows are ``x1,...,xd,value``; series files add
``n_max`` to the header and a ``degree`` column in front of the coordinates.
Exact values are written as ``p/q`` (or ``p``), floats with ``repr`` so that
they parse back to the identical double.
"""

from __future__ import annotations

import csv
import os
from fractions import Fraction
from pathlib import Path

import numpy as np

from .lattice import LatticeFunction, SeriesFunction

FORMAT_VERSION = 1
CACHE_ENV = "LACELAB_CACHE_DIR"


class CacheFormatError(ValueError):
    pass


def cache_dir() -> Path:
    """Directory for cached tables: ``$LACELAB_CACHE_DIR`` or ``~/.cache/lacelab``."""
    root = os.environ.get(CACHE_ENV)
    path = Path(root) if root else Path.home() / ".cache" / "lacelab"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(v, exact: bool) -> str:
    if exact:
        return str(Fraction(v))
    return repr(float(v))


def _parse(s: str, exact: bool):
    if exact:
        v = Fraction(s)
        return int(v) if v.denominator == 1 else v
    return float(s)


def _write(path, kind: str, meta: dict, columns: list[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# lacelab-{kind}\n")
        fh.write(f"# version={FORMAT_VERSION}\n")
        for k, v in meta.items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        w.writerows(rows)


def _read(path, kind: str):
    meta = {}
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body_start = 0
    for i, line in enumerate(lines):
        if not line.startswith("#"):
            body_start = i
            break
        text = line[1:].strip()
        if i == 0:
            if text != f"lacelab-{kind}":
                raise CacheFormatError(f"{path}: expected a lacelab-{kind} file, found {text!r}")
            continue
        key, _, val = text.partition("=")
        meta[key.strip()] = val.strip()
    else:
        body_start = len(lines)
    if int(meta.get("version", -1)) != FORMAT_VERSION:
        raise CacheFormatError(f"{path}: unsupported format version {meta.get('version')}")
    reader = csv.reader(lines[body_start:])
    header = next(reader, None)
    return meta, header, list(reader)


def write_lattice(path, f: LatticeFunction) -> None:
    mode = "exact" if f.exact else "float"
    r = f.rmax
    rows = []
    for x, v in f.items():
        rows.append([*x, _fmt(v, f.exact)])
    cols = [f"x{i + 1}" for i in range(f.d)] + ["value"]
    _write(path, "lattice", {"d": f.d, "rmax": r, "mode": mode, "trunc": repr(f.trunc)}, cols, rows)


def read_lattice(path) -> LatticeFunction:
    meta, _, rows = _read(path, "lattice")
    try:
        d, r, exact = int(meta["d"]), int(meta["rmax"]), meta["mode"] == "exact"
    except KeyError as e:
        raise CacheFormatError(f"{path}: missing header field {e}") from None
    pts = {}
    for row in rows:
        if len(row) != d + 1:
            raise CacheFormatError(f"{path}: row {row} does not have {d + 1} fields")
        pts[tuple(int(c) for c in row[:d])] = _parse(row[d], exact)
    f = LatticeFunction.from_points(d, r, pts, exact)
    f.trunc = float(meta.get("trunc", 0.0))
    return f


def write_series(path, s: SeriesFunction) -> None:
    n_max, d = s.n_max, s.d
    rows = []
    for n in range(n_max + 1):
        for x, v in s.coefficient(n).items():
            rows.append([n, *x, _fmt(v, True)])
    cols = ["degree"] + [f"x{i + 1}" for i in range(d)] + ["value"]
    _write(path, "series", {"d": d, "rmax": n_max, "mode": "exact", "n_max": n_max}, cols, rows)


def read_series(path) -> SeriesFunction:
    meta, _, rows = _read(path, "series")
    d, n_max = int(meta["d"]), int(meta["n_max"])
    arr = SeriesFunction.zeros(d, n_max).coeffs.copy()
    for row in rows:
        n = int(row[0])
        x = tuple(int(c) + n_max for c in row[1 : d + 1])
        arr[(n,) + x] = _parse(row[d + 1], True)
    return SeriesFunction(arr, n_max)


def write_table(path, columns: list[str], rows) -> Path:
    """Plain CSV table with a header row; values are written with ``repr`` for floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def cached_lattice(name: str, build) -> LatticeFunction:
    """Read ``name`` from the cache directory, or build it and write it there.

    A file that fails to parse is rebuilt and overwritten.
    """
    path = cache_dir() / name
    if path.exists():
        try:
            return read_lattice(path)
        except (CacheFormatError, ValueError, KeyError):
            pass
    f = build()
    write_lattice(path, f)
    return f
