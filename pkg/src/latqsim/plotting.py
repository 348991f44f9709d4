"""Figure rendering for result series (matplotlib, file output only)."""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 120,
    "axes.labelsize": 12,
    "axes.titlesize": 12,
    "xtick.labelsize": 10,
    "ytick.labelsize": 10,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "legend.fontsize": 9,
    "legend.frameon": False,
    "lines.markersize": 4,
    "savefig.bbox": "tight",
}

YLABELS = {
    "return_probability": r"$\mathcal{R}(t)$",
    "magnetization": r"$\langle S^z_i(t)\rangle$",
    "otoc": r"$O_0(t)$",
}


def plot_series(series: Sequence, labels: Sequence[str], path: str | Path, ylabel: str = "", title: str = "") -> Path:
    """Errorbar plot of one or more :class:`TimeSeries`; returns the written path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(STYLE):
        fig, ax = plt.subplots()
        many = len(series) > 6
        for s, label in zip(series, labels):
            if any(e > 0 for e in s.std_errors):
                ax.errorbar(s.times, s.values, yerr=s.std_errors, marker="o", capsize=2, label=label, lw=1)
            else:
                ax.plot(s.times, s.values, marker="o" if len(s) < 40 else None, label=label, lw=1)
        ax.set_xlabel(r"$t$")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(ncol=2 if many else 1)
        # fixed metadata keeps repeated renders byte-stable
        fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else None)
        plt.close(fig)
    return path


def plot_heatmap(series: Sequence, path: str | Path, label: str = "") -> Path:
    """Site-by-time image of per-site series (e.g. local magnetization)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.array([s.values for s in series])
    times = series[0].times
    with matplotlib.rc_context(STYLE):
        fig, ax = plt.subplots()
        dt = times[1] - times[0] if len(times) > 1 else 1.0
        img = ax.imshow(
            data,
            aspect="auto",
            origin="lower",
            cmap="RdBu_r",
            extent=(times[0] - dt / 2, times[-1] + dt / 2, -0.5, len(series) - 0.5),
        )
        fig.colorbar(img, ax=ax, label=label)
        ax.set_xlabel(r"$t$")
        ax.set_ylabel("site $i$")
        fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else None)
        plt.close(fig)
    return path

