"""Plot the CSVs produced by scripts/run_experiments.sh.

Usage: python3 scripts/plot_experiments.py [results_dir]  (default out/)
Writes one PNG next to each CSV it finds; missing files are skipped.
"""

import pathlib
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


def plot_ghz_correlators(df, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    for p, group in df.groupby("p"):
        g = group.sort_values("site_j")
        ax.errorbar(g["site_j"], g["estimate_mean"], yerr=g["estimate_std"],
                    marker="o", ms=3, lw=1, capsize=2, label=f"p={p}")
        ax.axhline(g["truth"].iloc[0], color="gray", lw=0.5, ls=":")
    ax.set_xlabel("site j")
    ax.set_ylabel(r"$\langle\sigma_z^0\sigma_z^j\rangle$")
    ax.legend(fontsize=8)
    fig.savefig(path, dpi=150, bbox_inches="tight")


def plot_max_error(df, path):
    fig, axes = plt.subplots(1, df["state"].nunique(), figsize=(9, 4), sharey=True)
    for ax, (state, by_state) in zip(np.atleast_1d(axes), df.groupby("state")):
        for povm, g in by_state.groupby("povm"):
            agg = g.groupby("samples")["max_error"].mean()
            ax.loglog(agg.index, agg.values, marker="o", label=povm)
        ax.set_title(state, fontsize=9)
        ax.set_xlabel("samples")
        ax.legend(fontsize=8)
    np.atleast_1d(axes)[0].set_ylabel("max pair error")
    fig.savefig(path, dpi=150, bbox_inches="tight")


def plot_pair_matrix(df, path, panel_key=None):
    panels = list(df.groupby(panel_key)) if panel_key else [("", df)]
    fig, axes = plt.subplots(1, len(panels), figsize=(4 * len(panels), 3.5))
    for ax, (label, g) in zip(np.atleast_1d(axes), panels):
        ax.scatter(g["truth"], g["estimate"], s=8)
        lim = [g["truth"].min() - 0.1, g["truth"].max() + 0.1]
        ax.plot(lim, lim, color="gray", lw=0.7)
        ax.set_title(str(label), fontsize=9)
        ax.set_xlabel("exact")
    np.atleast_1d(axes)[0].set_ylabel("shadow estimate")
    fig.savefig(path, dpi=150, bbox_inches="tight")


def plot_fidelity(df, path):
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharex=True)
    for samples, g in df.groupby("samples"):
        raw = g.groupby("n")["raw_fidelity"]
        proj = g.groupby("n")["projected_fidelity"]
        axes[0].errorbar(raw.mean().index, raw.mean(), yerr=raw.std(),
                         marker="o", capsize=2, label=f"N={samples}")
        axes[1].errorbar(proj.mean().index, proj.mean(), yerr=proj.std(),
                         marker="s", capsize=2, label=f"N={samples}")
    axes[0].set_title("raw (unbiased)")
    axes[1].set_title("simplex-projected")
    for ax in axes:
        ax.axhline(1.0, color="gray", lw=0.5, ls=":")
        ax.set_xlabel("qubits")
        ax.legend(fontsize=8)
    axes[0].set_ylabel("GHZ fidelity")
    fig.savefig(path, dpi=150, bbox_inches="tight")


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "out")
    jobs = [
        ("ghz_correlators.csv", plot_ghz_correlators, {}),
        ("max_error_scaling.csv", plot_max_error, {}),
        ("ising.csv", plot_pair_matrix, {"panel_key": "regime"}),
        ("heisenberg.csv", plot_pair_matrix, {}),
        ("fidelity.csv", plot_fidelity, {}),
    ]
    for name, fn, kwargs in jobs:
        src = out / name
        if not src.exists():
            print(f"skip {src} (not found)")
            continue
        dst = src.with_suffix(".png")
        fn(pd.read_csv(src), dst, **kwargs)
        print(f"wrote {dst}")


if __name__ == "__main__":
    main()
