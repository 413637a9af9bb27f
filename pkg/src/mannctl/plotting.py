"""Optional PNG figures written next to the CSV/JSON outputs.

Only imported when the CLI is asked for plots, so matplotlib stays off the
simulation path.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return path


def plot_run(traj, path: Path, title: str = "", jump_times=(), c_w: float = 1.0) -> Path:
    """Angle of attack vs command, control split, estimation error, hidden layer and memory read."""
    t = traj.t
    ch = traj.channels
    fig, ax = plt.subplots(4, 1, figsize=(8, 9), sharex=True)
    ax[0].plot(t, np.degrees(ch["s"]), "k--", lw=1, label="s")
    ax[0].plot(t, np.degrees(ch["alpha"]), lw=1.2, label="alpha")
    ax[0].set_ylabel("deg")
    ax[0].legend(loc="best", fontsize=8)
    for name in ("u", "u_bl", "u_ad"):
        ax[1].plot(t, ch[name][:, 0] if ch[name].ndim > 1 else ch[name], lw=1, label=name)
    ax[1].legend(loc="best", fontsize=8)
    ax[2].plot(t, ch["f_true"] - ch["f_hat"], lw=1)
    ax[2].set_ylabel("f - f_hat")
    scale = 1.0 / c_w if c_w else 1.0
    for j in range(ch["hidden"].shape[1]):
        line, = ax[3].plot(t, ch["hidden"][:, j], lw=1)
        if np.any(ch["M_r"][:, j]):
            ax[3].plot(t, ch["M_r"][:, j] * scale, ls=":", lw=1, color=line.get_color())
    ax[3].set_ylabel("hidden / M_r")
    ax[3].set_xlabel("t [s]")
    for a in ax:
        for tj in jump_times:
            a.axvline(tj, color="0.6", lw=0.8)
    if title:
        ax[0].set_title(title)
    return _save(fig, path)


def plot_compare(report: dict, path: Path) -> Path:
    """Per-epoch median peak deviation for every variant."""
    variants = list(report["variants"])
    n_ep = len(report["epochs"])
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / max(len(variants), 1)
    x = np.arange(n_ep)
    for i, v in enumerate(variants):
        med = [s["median"] for s in report["variants"][v]["peak_deviation_deg"]]
        ax.bar(x + i * width, med, width, label=v)
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels([f"[{a:g}, {b:g})" for a, b in report["epochs"]])
    ax.set_ylabel("median peak |alpha - s| [deg]")
    ax.legend(fontsize=8)
    ax.set_title(report["scenario"])
    return _save(fig, path)


def plot_ratio_hist(ratios, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(ratios, bins=20, range=(0.0, 1.0), color="0.4")
    ax.axvline(0.5, color="r", lw=1)
    ax.set_xlabel("max|e_m| / e_bl_max")
    ax.set_ylabel("runs")
    return _save(fig, path)


def plot_sweep(table, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(table.K_v, table.lam_min, "o-", label=f"lambda_min (slope {table.slope_min:.3f})")
    ax.loglog(table.K_v, table.lam_max, "s-", label=f"lambda_max (slope {table.slope_max:.3f})")
    ax.loglog(table.K_v, table.pb_norm, "^-", label=f"||PB||_F (slope {table.slope_pb:.3f})")
    ax.set_xlabel("K_v")
    ax.legend(fontsize=8)
    return _save(fig, path)
