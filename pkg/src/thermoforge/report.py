"""Figure and delimited-output rendering for the CLI report paths.

All figures go through the Agg backend so reports render identically on
headless machines; every figure-producing command also writes the matching
CSV so downstream tooling never has to parse an image.
"""

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .metrics import CELLS


def save_geometry_png(path, raster, title=None):
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(np.asarray(raster), cmap="gray", vmin=0.0, vmax=1.0, interpolation="nearest")
    ax.set_axis_off()
    if title:
        ax.set_title(title, fontsize=9)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return Path(path)


def save_field_png(path, field, title=None, cmap="inferno", vmin=None, vmax=None):
    fig, ax = plt.subplots(figsize=(4.6, 4))
    im = ax.imshow(np.asarray(field), cmap=cmap, vmin=vmin, vmax=vmax, interpolation="nearest")
    ax.set_axis_off()
    if title:
        ax.set_title(title, fontsize=9)
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return Path(path)


def save_interpolation_strip(path, rasters, fields=None, ts=None):
    """One row of decoded geometries, optionally a second row of fields."""
    k = len(rasters)
    nrows = 2 if fields is not None else 1
    fig, axes = plt.subplots(nrows, k, figsize=(1.6 * k, 1.8 * nrows), squeeze=False)
    vmax = max(float(np.max(f)) for f in fields) if fields is not None else None
    for c in range(k):
        axes[0][c].imshow(rasters[c], cmap="gray", vmin=0, vmax=1, interpolation="nearest")
        axes[0][c].set_axis_off()
        if ts is not None:
            axes[0][c].set_title(f"t={ts[c]:.2f}", fontsize=8)
        if fields is not None:
            axes[1][c].imshow(fields[c], cmap="inferno", vmin=0, vmax=vmax, interpolation="nearest")
            axes[1][c].set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_sample_grid(path, rasters, valid_flags, ncols=5):
    k = len(rasters)
    nrows = (k + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(1.7 * ncols, 1.9 * nrows), squeeze=False)
    for i in range(nrows * ncols):
        ax = axes[i // ncols][i % ncols]
        ax.set_axis_off()
        if i < k:
            ax.imshow(rasters[i], cmap="gray", vmin=0, vmax=1, interpolation="nearest")
            ax.set_title("valid" if valid_flags[i] else "invalid",
                         fontsize=8, color="green" if valid_flags[i] else "red")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_training_curve(path, history, keys=("total",)):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    xs = history.get("step") or history.get("epoch")
    for key in keys:
        if history.get(key):
            ax.plot(xs, history[key], label=key)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_study_csv(path, study):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["cell", "mse_mean", "mse_std", "nmse_mean", "nmse_std",
                    "inf_nrm_mean", "inf_nrm_std", "n_samples"])
        for cell in CELLS:
            s = study[cell]["stats"]
            w.writerow([cell, s.mse_mean, s.mse_std, s.nmse_mean, s.nmse_std,
                        s.inf_nrm_mean, s.inf_nrm_std, s.n_samples])
    return Path(path)


def save_study_figures(out_dir, study, example=None):
    """NMSE bar chart plus an optional truth/prediction/error panel."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(5.4, 3.4))
    means = [study[c]["stats"].nmse_mean for c in CELLS]
    stds = [study[c]["stats"].nmse_std for c in CELLS]
    ax.bar(range(4), means, yerr=stds, capsize=4, color="#4878d0")
    ax.set_xticks(range(4), CELLS, rotation=20, fontsize=8)
    ax.set_ylabel("NMSE (test, mean ± std)")
    ax.set_yscale("log")
    fig.tight_layout()
    p = out_dir / "study_nmse.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)

    if example is not None:
        reference = example["reference"]
        vmax = float(np.max(reference))
        fig, axes = plt.subplots(len(CELLS), 3, figsize=(8.4, 2.6 * len(CELLS)), squeeze=False)
        for r, cell in enumerate(CELLS):
            pred = example["predictions"][cell]
            for c, (img, title, cmap, vm) in enumerate((
                (reference, f"{cell}: reference", "inferno", vmax),
                (pred, "prediction", "inferno", vmax),
                (np.abs(pred - reference), "|error|", "magma", None),
            )):
                im = axes[r][c].imshow(img, cmap=cmap, vmin=0, vmax=vm, interpolation="nearest")
                axes[r][c].set_axis_off()
                axes[r][c].set_title(title, fontsize=8)
                fig.colorbar(im, ax=axes[r][c], fraction=0.046, pad=0.04)
        fig.tight_layout()
        p = out_dir / "study_example.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        written.append(p)
    return written


def save_bench_figure(path, report):
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    ax.bar([0, 1], [report.solver_s_per_sample, report.surrogate_s_per_sample],
           color=["#d65f5f", "#4878d0"])
    ax.set_xticks([0, 1], ["FD solver", "surrogate (amortized)"], fontsize=9)
    ax.set_ylabel("seconds / sample")
    ax.set_yscale("log")
    ax.set_title(f"speedup ×{report.speedup_factor:.1f} at {report.grid[0]}×{report.grid[1]}", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_validity_csv(path, rows):
    """rows: dicts with index/t/figure_count/area_fraction/valid."""
    if not rows:
        return Path(path)
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    return Path(path)
