"""Figure rendering for the CLI report path (PNG files next to the CSVs)."""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "trajectory_figure",
    "bounds_figure",
    "reconstruct_figure",
    "certificate_figure",
    "probe_figure",
    "decay_figure",
]

plt.rcParams.update(
    {
        "figure.figsize": (6.4, 4.0),
        "figure.dpi": 130,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "font.size": 9,
    }
)


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def trajectory_figure(traj, path):
    fig, ax = plt.subplots()
    for i in range(traj.n):
        ax.plot(traj.grid, traj.values[:, i], lw=1.0, label=f"x_{i + 1}")
    for pos, idx in enumerate(traj.jump_indices):
        t = traj.grid[idx]
        ax.plot([t, t], [traj.values_left[pos].max(), traj.values[idx].max()],
                color="0.4", lw=0.8, ls=":")
    ax.set_xlabel("t")
    ax.set_ylabel("x(t)")
    ax.legend(loc="best")
    return _finish(fig, path)


def bounds_figure(rows, rate, offset, path):
    rows = np.asarray(rows, dtype=float)
    gaps = rows[:, 1] - rows[:, 0]
    fig, ax = plt.subplots()
    ax.semilogy(gaps, np.maximum(rows[:, 2], 1e-300), ".", ms=2, label="norm")
    order = np.argsort(gaps)
    ax.semilogy(gaps[order], np.exp(-rate * (gaps[order] - offset)), "r-", lw=1.0,
                label="envelope")
    ax.set_xlabel("t - s")
    ax.set_ylabel("||X(t, s)||")
    ax.legend(loc="best")
    return _finish(fig, path)


def reconstruct_figure(traj, t_list, recon, path):
    fig, ax = plt.subplots()
    for i in range(traj.n):
        ax.plot(traj.grid, traj.values[:, i], lw=1.0, label=f"direct x_{i + 1}")
    recon = np.asarray(recon)
    for i in range(recon.shape[1]):
        ax.plot(t_list, recon[:, i], "o", ms=5, label=f"reconstructed x_{i + 1}")
    ax.set_xlabel("t")
    ax.set_ylabel("x(t)")
    ax.legend(loc="best")
    return _finish(fig, path)


def certificate_figure(cert, path):
    named = [(c.name, c.margin, c.passed) for c in cert.conditions
             if math.isfinite(c.margin)]
    fig, ax = plt.subplots()
    if named:
        labels, margins, ok = zip(*named)
        colors = ["tab:green" if p else "tab:red" for p in ok]
        ax.barh(range(len(labels)), margins, color=colors)
        ax.set_yticks(range(len(labels)))
        ax.set_yticklabels([lbl[:40] for lbl in labels])
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlabel("margin (rhs - lhs)")
    ax.set_title(f"{cert.kind}: {cert.status}")
    return _finish(fig, path)


def probe_figure(results, path):
    fig, ax = plt.subplots()
    for res, label in results:
        ax.semilogy(res.horizons[1:], np.maximum(res.increments, 1e-300), "o-",
                    label=label)
    ax.set_xlabel("horizon")
    ax.set_ylabel("norm-power increment")
    ax.legend(loc="best")
    return _finish(fig, path)


def decay_figure(rows, fit, path):
    rows = np.asarray(rows, dtype=float)
    gaps = rows[:, 1] - rows[:, 0]
    fig, ax = plt.subplots()
    ax.semilogy(gaps, np.maximum(rows[:, 2], 1e-300), ".", ms=2, label="samples")
    order = np.argsort(gaps)
    ax.semilogy(gaps[order], fit.prefactor * np.exp(-fit.rate * gaps[order]), "r-",
                lw=1.0, label=f"envelope (rate {fit.rate:.3g})")
    ax.set_xlabel("t - s")
    ax.set_ylabel("||X(t, s)||")
    ax.legend(loc="best")
    return _finish(fig, path)
