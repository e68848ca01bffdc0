"""Figure rendering for the CLI report paths.

matplotlib is imported lazily with the Agg backend so the numerical
library never depends on a display; every function writes a PNG next to
the CSV it illustrates.
"""

from __future__ import annotations

import math

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    plt.rcParams.update(
        {
            "figure.figsize": (7.0, 4.4),
            "font.size": 10,
            "axes.grid": True,
            "grid.alpha": 0.3,
            "savefig.dpi": 130,
        }
    )
    return plt


def acdf_figure(path, xs, gbar_re, acdf_vals, cdf_vals, ground_x=None, eta=None):
    plt = _pyplot()
    fig, ax = plt.subplots()
    ax.plot(xs, gbar_re, lw=0.8, color="tab:red", label="sampled estimate")
    ax.plot(xs, acdf_vals, lw=1.2, color="tab:blue", label="smoothed CDF")
    ax.step(xs, cdf_vals, lw=1.0, color="black", where="post", alpha=0.6, label="CDF")
    if ground_x is not None:
        ax.axvline(ground_x, color="gray", ls="--", lw=0.8, label="ground state")
    if eta is not None:
        ax.axhline(eta / 2.0, color="tab:green", ls=":", lw=0.8, label="eta/2")
    ax.set_xlabel("rescaled energy x")
    ax.set_ylabel("cumulative weight")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def sweep_figure(path, epsilons, total_times, max_times, mean_errors):
    plt = _pyplot()
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.6))
    eps = np.asarray(epsilons, dtype=float)

    for ax, ys, label in (
        (axes[0], np.asarray(total_times), "total evolution time"),
        (axes[1], np.asarray(max_times), "max evolution time"),
    ):
        ax.loglog(eps, ys, "o-", color="tab:blue")
        guide = ys[0] * (eps / eps[0]) ** -1.0
        ax.loglog(eps, guide, "--", color="gray", lw=0.8, label="slope -1")
        ax.set_xlabel("epsilon")
        ax.set_ylabel(label)
        ax.legend(fontsize=8)

    axes[2].loglog(eps, np.asarray(mean_errors), "o-", color="tab:red", label="mean error")
    axes[2].loglog(eps, eps, "--", color="gray", lw=0.8, label="epsilon")
    axes[2].set_xlabel("epsilon")
    axes[2].set_ylabel("energy error")
    axes[2].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def qpe_compare_figure(path, overlaps, curves):
    """curves: {method: (mean_errors, failure_rates)}"""
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.8))
    styles = {
        "qpe-fixed": ("tab:blue", "-."),
        "qpe-scaled": ("tab:green", "--"),
        "this-work": ("tab:red", "-"),
    }
    inv = 1.0 / np.asarray(overlaps, dtype=float)
    for method, (errs, fails) in curves.items():
        color, ls = styles.get(method, ("black", "-"))
        axes[0].semilogx(inv, errs, ls, color=color, marker="o", ms=3, label=method)
        axes[1].semilogx(inv, fails, ls, color=color, marker="o", ms=3, label=method)
    axes[0].set_xlabel("1 / overlap")
    axes[0].set_ylabel("mean error (rescaled units)")
    axes[1].set_xlabel("1 / overlap")
    axes[1].set_ylabel("failure rate")
    for ax in axes:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def filter_figure(path, filt):
    from .filters import trig_poly_uniform, uniform_grid

    plt = _pyplot()
    n = 1 << max(12, int(math.ceil(math.log2(2 * filt.degree + 2))))
    xs = uniform_grid(n)
    vals = trig_poly_uniform(filt.coeffs, n).real
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.8))
    axes[0].plot(xs, vals, lw=0.9)
    axes[0].plot(xs, (xs >= 0).astype(float), lw=0.7, color="gray", alpha=0.7)
    axes[0].set_xlabel("x")
    axes[0].set_ylabel("filter value")
    js = filt.js
    mags = np.abs(filt.coeffs)
    nz = mags > 0
    axes[1].semilogy(np.abs(js[nz]), mags[nz], ".", ms=2.5, label="|coefficient|")
    j_pos = np.arange(1, filt.degree + 1)
    axes[1].semilogy(j_pos, (1.0 + filt.eps_bound) / (np.pi * j_pos), "--", lw=0.8, color="gray", label="decay bound")
    axes[1].set_xlabel("|j|")
    axes[1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
