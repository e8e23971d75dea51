"""Figure rendering for the report path.

Recipes and report commands render PNG figures next to the delimited
output.  All functions take in-memory results and a target path; nothing
here feeds back into the numerics.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _new_axes(xlabel, ylabel, title=None):
    fig, ax = plt.subplots(figsize=(6.0, 4.2), dpi=120)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3, which="both")
    return fig, ax


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def trajectory_figure(traj, path, title=None):
    """Defect density and residual energy along one annealing run."""
    fig, ax = _new_axes("t", "observable", title)
    t = traj.times
    mask = t > 0
    ax.plot(t[mask], traj.column("rho_def")[mask], "o-", ms=3, label=r"$\rho_{def}$")
    ax.plot(t[mask], np.maximum(traj.column("eps_res")[mask], 1e-300), "s-", ms=3,
            label=r"$\epsilon_{res}$")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.legend()
    return _finish(fig, path)


def scaling_figure(series, path, title=None, fits=None):
    """Final defect density vs annealing time, log-log, one line per label.

    ``series`` maps label -> (tau array, value array); ``fits`` optionally
    maps label -> callable tau -> model value, drawn as dashed lines.
    """
    fig, ax = _new_axes(r"annealing time $\tau$", r"$\rho_{def}(\tau)$", title)
    for label, (tau, vals) in series.items():
        ax.plot(tau, vals, "o-", ms=4, label=label)
    if fits:
        for label, fn in fits.items():
            tau = np.asarray(series[label][0] if label in series else
                             list(series.values())[0][0])
            grid = np.geomspace(tau.min(), tau.max(), 200)
            ax.plot(grid, fn(grid), "--", lw=1, alpha=0.8)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def deviation_figure(tau, deviation, path, title=None):
    """Log-linear view of a quantity decaying exponentially in tau."""
    fig, ax = _new_axes(r"annealing time $\tau$", r"$\Delta\rho_{def}$", title)
    pos = deviation > 0
    ax.plot(np.asarray(tau)[pos], np.asarray(deviation)[pos], "o-", ms=4)
    ax.set_yscale("log")
    return _finish(fig, path)


def lz_figure(results, path, title=None):
    """Excitation probability vs time for a set of Landau-Zener runs."""
    fig, ax = _new_axes("t", r"$P_{ex}(t)$", title)
    for res in results:
        ax.plot(res.times, np.maximum(res.p_ex, 1e-300),
                label=f"{res.domain} q={res.q:g}")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def gap_histogram_figure(gaps_by_L, path, title=None, rescale=True):
    """Distributions of -ln(gap)/sqrt(L) (or raw gaps) across sizes."""
    fig, ax = _new_axes(r"$g=-\ln\Delta/\sqrt{L}$" if rescale else r"$\Delta$",
                        "probability density", title)
    for L, gaps in sorted(gaps_by_L.items()):
        data = -np.log(gaps) / np.sqrt(L) if rescale else gaps
        ax.hist(data, bins=24, density=True, histtype="step", label=f"L={L}")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def histogram_figure(edges, counts, path, xlabel, title=None, marks=None):
    """Pre-binned histogram with optional vertical marker lines."""
    fig, ax = _new_axes(xlabel, "count", title)
    widths = np.diff(edges)
    ax.bar(edges[:-1], counts, width=widths, align="edge", alpha=0.6)
    for label, x in (marks or {}).items():
        ax.axvline(x, ls="--", lw=1, label=label)
    if marks:
        ax.legend(fontsize=8)
    return _finish(fig, path)
