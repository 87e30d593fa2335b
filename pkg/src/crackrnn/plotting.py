"""Render result figures to PNG files next to the CSV outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "plot_scatter",
    "plot_ratio_band",
    "plot_size_sweep",
    "plot_distribution_sweep",
    "plot_unreliability",
    "plot_loss_history",
]

_DPI = 150


def _save(fig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)


def plot_scatter(actual: np.ndarray, predicted_by_phase: dict[str, np.ndarray],
                 path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    lo = float(min(np.min(a) for a in ([actual] + list(predicted_by_phase.values()))))
    hi = float(max(np.max(a) for a in ([actual] + list(predicted_by_phase.values()))))
    ax.plot([lo, hi], [lo, hi], "k--", lw=1, label="perfect")
    for phase, pred in sorted(predicted_by_phase.items()):
        ax.plot(actual, pred, "o", ms=3, alpha=0.6, label=phase)
    ax.set_xlabel("actual crack length (m)")
    ax.set_ylabel("predicted crack length (m)")
    ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_ratio_band(bands_by_phase: dict[str, np.ndarray], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for phase, band in sorted(bands_by_phase.items()):
        cycles = np.arange(1, band.shape[0] + 1)
        ax.fill_between(cycles, band[:, 0], band[:, 1], alpha=0.4, label=phase)
    ax.axhline(1.0, color="k", lw=1, ls="--")
    ax.axhline(0.85, color="gray", lw=0.8, ls=":")
    ax.axhline(1.15, color="gray", lw=0.8, ls=":")
    ax.set_xlabel("cycle")
    ax.set_ylabel("predicted / actual")
    ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_size_sweep(results: list[tuple[int, float]], path: Path) -> None:
    sizes = [s for s, _ in results]
    mses = [m for _, m in results]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(sizes, mses, "o-")
    ax.set_xlabel("training observations")
    ax.set_ylabel("fleet MSE (m$^2$)")
    ax.grid(alpha=0.3, which="both")
    _save(fig, path)


def plot_distribution_sweep(results: dict[int, tuple[str, float]], path: Path) -> None:
    cases = sorted(results)
    labels = [f"#{c}\n{results[c][0]}" for c in cases]
    mses = [results[c][1] for c in cases]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(cases)), mses)
    ax.set_yscale("log")
    ax.set_xticks(range(len(cases)), labels)
    ax.set_xlabel("observation distribution case")
    ax.set_ylabel("fleet MSE (m$^2$)")
    ax.grid(alpha=0.3, axis="y", which="both")
    _save(fig, path)


def plot_unreliability(curves: dict[float, np.ndarray], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for a_th in sorted(curves):
        curve = curves[a_th]
        cycles = np.arange(1, curve.size + 1)
        ax.plot(cycles, curve, label=f"$a_{{th}}$ = {a_th:g} m")
    ax.set_xlabel("cycle")
    ax.set_ylabel("fleet proportion above threshold")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_loss_history(loss_history: list[float], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(np.arange(len(loss_history)), loss_history)
    ax.set_xlabel("epoch")
    ax.set_ylabel("training MSE (m$^2$)")
    ax.grid(alpha=0.3, which="both")
    _save(fig, path)
