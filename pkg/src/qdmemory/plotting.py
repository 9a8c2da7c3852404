"""Matplotlib figures written to files (Agg backend, no display needed)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    # fixed metadata keeps repeated renders byte-stable
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


def _gapped(x, y):
    """Insert NaNs where the abscissa jumps, so lines do not bridge excluded windows."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < 3:
        return x, y
    step = np.median(np.diff(x))
    cut = np.flatnonzero(np.diff(x) > 1.5 * step) + 1
    return np.insert(x, cut, np.nan), np.insert(y, cut, np.nan)


def fit_figure(fit, path, title="", xlabel="time (ns)", log=True) -> Path:
    """Data, model and residuals of one fit."""
    fig, (ax, axr) = plt.subplots(2, 1, figsize=(6.4, 4.8), sharex=True, gridspec_kw={"height_ratios": [3, 1]})
    ax.plot(fit.t, fit.data, ".", ms=3, color="0.3", label="data")
    ax.plot(*_gapped(fit.t, fit.model), "-", color="C3", lw=1.2, label="model")
    if log and np.all(fit.data >= 0) and np.any(fit.data > 0):
        ax.set_yscale("log")
    ax.set_ylabel("counts")
    ax.set_title(title)
    ax.legend(frameon=False)
    axr.plot(fit.t, fit.data - fit.model, ".", ms=3, color="C0")
    axr.axhline(0.0, color="0.5", lw=0.8)
    axr.set_xlabel(xlabel)
    axr.set_ylabel("resid.")
    return _save(fig, path)


def histogram_figure(hist, path, title="") -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    ax.step(hist.centers, hist.counts, where="mid", color="0.2", lw=0.8)
    ax.set_yscale("log")
    ax.set_xlabel("time (ns)")
    ax.set_ylabel("counts per bin")
    ax.set_title(title)
    return _save(fig, path)


def sweep_figure(rows, path) -> Path:
    """Internal efficiency versus storage time: measured points and the model curve."""
    rows = np.asarray(rows, dtype=float)
    fig, ax = plt.subplots(figsize=(5.6, 3.8))
    ax.errorbar(rows[:, 0], 100 * rows[:, 1], yerr=100 * rows[:, 2], fmt="o", ms=4, color="C0", label="simulated")
    ax.plot(rows[:, 0], 100 * rows[:, 3], "-", color="C3", label="model")
    ax.set_xlabel("storage time (ns)")
    ax.set_ylabel("internal efficiency (%)")
    ax.legend(frameon=False)
    return _save(fig, path)


def g2_figure(coinc, path) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 3.4))
    ax.step(coinc.centers, coinc.counts, where="mid", color="C0", lw=0.8)
    ax.set_xlabel("delay (ns)")
    ax.set_ylabel("coincidences")
    return _save(fig, path)


def report_figures(out_dir, stem, fits, coincidences=None) -> list[Path]:
    out_dir = Path(out_dir)
    paths = []
    labels = {
        "reference": ("reference (control off)", "time (ns)", True),
        "decay": ("decay fit", "time (ns)", True),
        "retrieval": ("storage and retrieval", "time (ns)", True),
        "fpi": ("Fabry-Perot scan", "scan sample", False),
    }
    for name, fit in fits.items():
        title, xlabel, log = labels.get(name, (name, "x", False))
        paths.append(fit_figure(fit, out_dir / f"{stem}_fit_{name}.png", title, xlabel, log))
    if coincidences is not None:
        paths.append(g2_figure(coincidences, out_dir / f"{stem}_g2.png"))
    return paths
