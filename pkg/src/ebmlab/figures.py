"""Matplotlib figure rendering for report paths.

Every CLI report that writes delimited output also renders the matching
figure to a file next to it. All rendering is headless (Agg).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_history_figure",
    "save_mosaic_figure",
    "save_map_figure",
    "save_tuning_figure",
    "save_ocularity_figure",
    "save_denoise_figure",
    "save_scatter_figure",
]


def save_history_figure(history, path):
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.2))
    it = history.iteration
    axes[0].plot(it, history.data_energy, label="data")
    if not all(np.isnan(history.sample_energy)):
        axes[0].plot(it, history.sample_energy, label="samples", alpha=0.7)
    axes[0].set_xlabel("iteration")
    axes[0].set_ylabel("mean energy")
    axes[0].legend(fontsize=8)
    for name, values in history.param_norms.items():
        axes[1].plot(it, values, label=name)
    axes[1].set_xlabel("iteration")
    axes[1].set_ylabel("parameter norm")
    axes[1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_mosaic_figure(mosaic_image, path, title=None):
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(mosaic_image, cmap="gray", interpolation="nearest")
    ax.set_axis_off()
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_map_figure(grids, mask, grid_shape, path):
    names = list(grids)
    fig, axes = plt.subplots(1, len(names), figsize=(2.6 * len(names), 2.8))
    if len(names) == 1:
        axes = [axes]
    for ax, name in zip(axes, names):
        vals = np.array(grids[name], dtype=float).reshape(grid_shape)
        m = np.asarray(mask).reshape(grid_shape)
        vals = np.where(m, vals, np.nan)
        cmap = "hsv" if name in ("orientation", "phase") else "viridis"
        im = ax.imshow(vals, cmap=cmap, interpolation="nearest")
        ax.set_title(name, fontsize=8)
        ax.set_axis_off()
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_tuning_figure(curves, path):
    """curves: dict family -> (grid, response matrix units x grid)."""
    fig, axes = plt.subplots(1, len(curves), figsize=(3.0 * len(curves), 2.8))
    if len(curves) == 1:
        axes = [axes]
    for ax, (family, (grid, resp)) in zip(axes, curves.items()):
        resp = np.atleast_2d(resp)
        med = np.median(resp, axis=0)
        lo = np.percentile(resp, 10, axis=0)
        hi = np.percentile(resp, 90, axis=0)
        ax.plot(grid, med, color="k")
        ax.plot(grid, lo, color="k", ls=":", lw=0.8)
        ax.plot(grid, hi, color="k", ls=":", lw=0.8)
        ax.set_title(family, fontsize=8)
        ax.set_ylim(0, 1.05)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_ocularity_figure(values, path, grid=None):
    fig, axes = plt.subplots(1, 2, figsize=(8, 3))
    values = np.asarray(values, dtype=float)
    if grid is not None:
        im = axes[0].imshow(values.reshape(grid), cmap="RdBu_r", interpolation="nearest")
        fig.colorbar(im, ax=axes[0], fraction=0.046)
    else:
        axes[0].plot(values)
        axes[0].axhline(0, color="k", lw=0.5)
        axes[0].set_xlabel("unit")
    axes[0].set_title("ocularity", fontsize=9)
    axes[1].hist(values, bins=21, color="gray")
    axes[1].set_title("histogram", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_denoise_figure(rows, path):
    """rows: list of dicts with noise_psnr / method / psnr keys."""
    methods = sorted({r["method"] for r in rows})
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    for method in methods:
        pts = sorted((r["noise_psnr"], r["psnr"]) for r in rows if r["method"] == method)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=method)
    ax.set_xlabel("input PSNR (dB)")
    ax.set_ylabel("output PSNR (dB)")
    ax.invert_xaxis()
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_scatter_figure(x, y, path, xlabel="", ylabel="", title=None, lims=None):
    fig, ax = plt.subplots(figsize=(3.6, 3.4))
    ax.plot(np.asarray(x), np.asarray(y), ".", ms=4, alpha=0.7)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if lims:
        ax.set_xlim(*lims)
        ax.set_ylim(*lims)
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
