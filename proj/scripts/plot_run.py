#!/usr/bin/env python3
"""Plot the CSV tables in a qbm output directory.

usage: plot_run.py OUT_DIR [--save DIR]

Each table is dispatched on its "# schema:" line. Without --save the figures
are shown interactively.
"""

import argparse
import pathlib

import matplotlib.pyplot as plt
import numpy as np


def read_table(path):
    with open(path) as fh:
        schema = fh.readline().split(":", 1)[1].strip()
    data = np.genfromtxt(path, delimiter=",", names=True, skip_header=1)
    return schema, data


def plot_kernel(d, ax):
    ax.plot(d["t"], d["K"], label="K(t)")
    ax.plot(d["t"], d["nu"], label="nu(t)")
    ax.set_xlabel("t")


def plot_trajectory(d, ax):
    ax.plot(d["t"], d["Q"], label="Q")
    ax.plot(d["t"], d["P"], label="P")
    if "F_BR" in d.dtype.names:
        ax.plot(d["t"], d["F"], label="F", lw=0.6)
        ax.plot(d["t"], d["F_BR"], label="F_BR", lw=0.6)
    ax.set_xlabel("t")


def plot_ensemble(d, ax):
    for name in ("mean_Q", "cov_QQ", "cov_PP", "energy"):
        ax.errorbar(d["t"], d[name], yerr=d["se_" + name], label=name, capsize=0, lw=0.8)
    ax.set_xlabel("t")


def plot_coefficients(d, ax):
    for name in ("OmegaBar2", "gammaBar", "d", "D"):
        ax.plot(d["t"], d[name], label=name)
    ax.set_xlabel("t")


def plot_forward(d, ax):
    for name in ("mean_Q", "cov_QQ", "cov_PP"):
        line, = ax.plot(d["t"], d[name], label=name)
        ax.plot(d["t"], d["exact_" + name], ls="--", color=line.get_color())
    ax.set_xlabel("t")


def plot_decoherence(d, ax):
    ax.semilogy(d["t"], np.maximum(d["visibility"], 1e-300), label="visibility")
    ax.semilogy(d["t"], d["purity"], label="purity")
    ax.set_xlabel("t")


def plot_wigner(d, ax):
    q = np.unique(d["Q"])
    p = np.unique(d["P"])
    f = d["f"].reshape(len(q), len(p)).T
    lim = np.abs(f).max()
    mesh = ax.pcolormesh(q, p, f, cmap="RdBu_r", vmin=-lim, vmax=lim, shading="auto")
    ax.figure.colorbar(mesh, ax=ax)
    ax.set_xlabel("Q")
    ax.set_ylabel("P")
    return False


PLOTTERS = {
    "qbm.kernel.v1": plot_kernel,
    "qbm.trajectory.v1": plot_trajectory,
    "qbm.trajectory_br.v1": plot_trajectory,
    "qbm.ensemble.v1": plot_ensemble,
    "qbm.master_coefficients.v1": plot_coefficients,
    "qbm.forward_check.v1": plot_forward,
    "qbm.decoherence.v1": plot_decoherence,
    "qbm.wigner_grid.v1": plot_wigner,
}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("out_dir", type=pathlib.Path)
    ap.add_argument("--save", type=pathlib.Path, help="write PNGs here instead of showing them")
    args = ap.parse_args()

    if args.save:
        plt.switch_backend("Agg")
        args.save.mkdir(parents=True, exist_ok=True)
    for path in sorted(args.out_dir.glob("*.csv")):
        schema, data = read_table(path)
        plotter = PLOTTERS.get(schema)
        if plotter is None or data.size < 2:
            continue
        fig, ax = plt.subplots(figsize=(7, 4.5))
        if plotter(data, ax) is not False:
            ax.legend()
        ax.set_title(path.name)
        fig.tight_layout()
        if args.save:
            fig.savefig(args.save / (path.stem + ".png"), dpi=120)
            plt.close(fig)
    if not args.save:
        plt.show()


if __name__ == "__main__":
    main()
