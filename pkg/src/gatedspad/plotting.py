"""Figures rendered next to the CSV outputs (``--plot``)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_pmf_compare(rows, path) -> None:
    """Two panels: Poisson binomial vs empirical, and binomial vs empirical."""
    data = np.array([(r[0], r[1], r[2], r[3], r[4]) for r in rows], dtype=float)
    with matplotlib.rc_context(RC):
        fig, axes = plt.subplots(1, 2, figsize=(7.0, 2.9), sharey=True)
        for lam in np.unique(data[:, 0]):
            sel = data[data[:, 0] == lam]
            k = sel[:, 1]
            for ax, col, name in ((axes[0], 2, "Poisson binomial"), (axes[1], 3, "binomial")):
                (line,) = ax.plot(k, sel[:, col], lw=1.0, label=f"{name}, $\\lambda_s$={lam:g}")
                ax.plot(k, sel[:, 4], "o", ms=2, mfc="none", color=line.get_color())
        for ax, tag in zip(axes, "ab"):
            ax.set_xlabel("detected counts")
            ax.set_title(f"({tag}) lines: model, markers: simulation", fontsize=8)
            ax.legend(frameon=False)
        axes[0].set_ylabel("PMF")
        _save(fig, path)


def plot_ser(results, axis: str, path) -> None:
    """SER of both detectors against the sweep variable, log scale."""
    x = np.array([r.sweep_value for r in results])
    floor = 0.5 / max(r.n_symbols for r in results)
    with matplotlib.rc_context(RC):
        fig, ax = plt.subplots(figsize=(3.5, 2.8))
        for attr, ci, label, marker in (
            ("ser_proposed", "ci95_proposed", "Poisson binomial (proposed)", "o"),
            ("ser_conventional", "ci95_conventional", "binomial (conventional)", "s"),
        ):
            y = np.array([getattr(r, attr) for r in results])
            err = np.array([getattr(r, ci) for r in results])
            ax.errorbar(x, np.maximum(y, floor), yerr=err, marker=marker, ms=3, lw=1, capsize=2,
                        label=label)
        ax.set_yscale("log")
        if axis == "background":
            ax.set_xscale("log")
            ax.set_xlabel("background photon rate (c/ns)")
        else:
            ax.set_xlabel("signal photon rate (c/ns)")
        ax.set_ylabel("SER")
        ax.legend(frameon=False)
        _save(fig, path)
