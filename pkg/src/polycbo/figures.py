"""Matplotlib rendering of run artifacts to standalone SVG files.

Headless by construction (Agg backend); every writer takes a target path
and closes its figure, so the helpers are safe to call from batch loops.
"""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

plt.rcParams["svg.hashsalt"] = "polycbo"

__all__ = [
    "save_histogram",
    "save_compare",
    "save_fpcheck",
    "save_laplace",
    "save_bench",
]


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def save_histogram(path, positions, step: int, time: float, band=None) -> None:
    """Snapshot histogram: coordinate histogram in 1D, joint histogram in
    2D, norm histogram above."""
    pos = np.asarray(positions, dtype=float)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    if pos.shape[1] == 1:
        ax.hist(pos[:, 0], bins=50, color="#4878b0", edgecolor="white")
        if band is not None:
            ax.axvspan(band[0], band[1], color="#d65f5f", alpha=0.2)
        ax.set_xlabel("position")
        ax.set_ylabel("particles")
    elif pos.shape[1] == 2:
        h = ax.hist2d(pos[:, 0], pos[:, 1], bins=40, cmap="viridis")
        fig.colorbar(h[3], ax=ax, label="particles")
        ax.set_xlabel("coord0")
        ax.set_ylabel("coord1")
    else:
        ax.hist(np.linalg.norm(pos, axis=1), bins=50, color="#4878b0", edgecolor="white")
        ax.set_xlabel("|position|")
        ax.set_ylabel("particles")
    ax.set_title(f"step {step}, t = {time:g}")
    fig.tight_layout()
    _save(fig, path)


def save_compare(path, times, v_t_by_label: dict, band_by_label: dict, band) -> None:
    """Two panels: concentration functional per kernel (log scale) and the
    fraction of particles inside the configured band."""
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(8.6, 3.4))
    for label, v in v_t_by_label.items():
        ax0.semilogy(times, np.maximum(np.asarray(v, dtype=float), 1e-16), label=label)
    ax0.set_xlabel("t")
    ax0.set_ylabel("V_t")
    ax0.legend()
    for label, frac in band_by_label.items():
        ax1.plot(times, frac, label=label)
    ax1.set_xlabel("t")
    ax1.set_ylabel(f"fraction in [{band[0]:g}, {band[1]:g}]")
    ax1.set_ylim(-0.02, 1.02)
    ax1.legend()
    fig.tight_layout()
    _save(fig, path)


def save_fpcheck(path, centers, rho, samples, times, w1) -> None:
    """Final-time density overlay (solver curve vs particle histogram) next
    to the transport-distance history."""
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(8.6, 3.4))
    ax0.plot(centers, rho, color="#d65f5f", label="solver")
    ax0.hist(samples, bins=80, density=True, color="#4878b0", alpha=0.6, label="particles")
    ax0.set_xlabel("x")
    ax0.set_ylabel("density")
    ax0.legend()
    ax1.plot(times, w1, color="#444444")
    ax1.set_xlabel("t")
    ax1.set_ylabel("W1")
    ax1.set_ylim(bottom=0.0)
    fig.tight_layout()
    _save(fig, path)


def save_laplace(path, lhs, rhs) -> None:
    """Scatter of bound sides per instance; points above the diagonal would
    be violations."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    fig, ax = plt.subplots(figsize=(4.2, 3.8))
    ax.scatter(rhs, lhs, s=12, color="#4878b0", alpha=0.7)
    top = max(float(rhs.max()), float(lhs.max())) if len(lhs) else 1.0
    ax.plot([0, top], [0, top], color="#d65f5f", linewidth=1.0)
    ax.set_xlabel("bound")
    ax.set_ylabel("distance")
    fig.tight_layout()
    _save(fig, path)


def save_bench(path, n_list, mean_v, std_v) -> None:
    """Final concentration value against ensemble size with seed spread."""
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ax.errorbar(n_list, mean_v, yerr=std_v, fmt="o-", color="#4878b0", capsize=3)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("final V")
    fig.tight_layout()
    _save(fig, path)
