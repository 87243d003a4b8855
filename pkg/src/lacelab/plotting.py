"""Figures written next to CSV output. matplotlib is imported on first use with the Agg backend."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .srw import radii


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    _pyplot().close(fig)
    return path


def radial_plot(f, path, title: str = "", reference=None, power: float = 0.0) -> Path:
    """|f(x)| |x|^power against |x| for every box point, optionally with a reference function."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    r = radii(f.d, f.rmax).ravel()
    keep = r > 0
    scale = np.where(keep, r, 1.0) ** power
    ax.scatter(r[keep], (np.abs(f.to_float().values.ravel()) * scale)[keep], s=4, label="value")
    if reference is not None:
        ref = reference.to_float().with_radius(f.rmax).values.ravel()
        ax.scatter(r[keep], (np.abs(ref) * scale)[keep], s=4, marker="x", label="reference")
        ax.legend()
    ax.set_xlabel("|x|")
    ax.set_ylabel(f"|f(x)| |x|^{power:g}" if power else "|f(x)|")
    ax.set_yscale("log")
    ax.set_title(title)
    return _save(fig, path)


def series_plot(xs, ys, path, xlabel: str, ylabel: str, title: str = "", hlines=(), logy: bool = False) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(xs, ys, marker="o", ms=3)
    for h in hlines:
        ax.axhline(h, color="grey", lw=0.8, ls="--")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    ax.set_title(title)
    return _save(fig, path)


def profile_plot(profiles: dict, path, ylabel: str, title: str = "") -> Path:
    """One line per named shell profile {shell: value}."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name, prof in profiles.items():
        ks = sorted(prof)
        ax.plot(ks, [prof[k] for k in ks], marker="o", ms=3, label=name)
    ax.set_xlabel("shell")
    ax.set_ylabel(ylabel)
    ax.set_yscale("log")
    ax.legend()
    ax.set_title(title)
    return _save(fig, path)
