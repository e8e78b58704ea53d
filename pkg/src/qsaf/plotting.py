"""Figures written next to the CSV/JSON output of a run.

Uses the non-interactive Agg backend; every function saves one PNG and
closes its figure.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_diagnostics(diagnostics, path, title: str | None = None):
    """Max purity gap (log scale) and potential J against the iteration."""
    diag = np.asarray(diagnostics, dtype=float)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    gap = np.maximum(diag[:, 1], 1e-300)
    ax1.semilogy(diag[:, 0], gap, color="C0")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("max purity gap")
    ax2.plot(diag[:, 0], diag[:, 2], color="C1")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("potential J")
    for ax in (ax1, ax2):
        ax.grid(alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_potential(diagnostics, path):
    diag = np.asarray(diagnostics, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(diag[:, 0], diag[:, 2], marker=".", markersize=3)
    ax.set_xlabel("iteration")
    ax.set_ylabel("J")
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_series(steps, values, path, ylabel: str, log: bool = False):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    values = np.asarray(values, dtype=float)
    if log:
        ax.semilogy(steps, np.maximum(values, 1e-300))
    else:
        ax.plot(steps, values)
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_trajectory(steps, values, path, ylabel: str = "eigenvalue", labels=None):
    """One line per column of ``values`` (e.g. eigenvalues or simplex coordinates)."""
    values = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for j in range(values.shape[1]):
        ax.plot(steps, values[:, j], label=labels[j] if labels else f"{j + 1}")
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    ax.set_ylim(-0.05, 1.05)
    if values.shape[1] <= 8:
        ax.legend(fontsize="small", ncol=2)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_image_panels(panels, path):
    """Side-by-side images; ``panels`` is a list of ``(title, array)`` pairs.

    2-D arrays are shown in gray, 3-D arrays as RGB in ``[0, 1]``.
    """
    fig, axes = plt.subplots(1, len(panels), figsize=(3 * len(panels), 3.2), squeeze=False)
    for ax, (title, img) in zip(axes[0], panels):
        img = np.asarray(img)
        if img.ndim == 2:
            ax.imshow(img, cmap="gray", interpolation="nearest")
        else:
            ax.imshow(np.clip(img, 0, 1), interpolation="nearest")
        ax.set_title(title)
        ax.axis("off")
    fig.tight_layout()
    return _save(fig, path)


def plot_bloch_vectors(vectors, path, colors=None):
    """Scatter of Bloch vectors with the unit sphere as wireframe."""
    d = np.asarray(vectors, dtype=float).reshape(-1, 3)
    fig = plt.figure(figsize=(4, 4))
    ax = fig.add_subplot(projection="3d")
    u, v = np.mgrid[0 : 2 * np.pi : 24j, 0 : np.pi : 12j]
    ax.plot_wireframe(np.cos(u) * np.sin(v), np.sin(u) * np.sin(v), np.cos(v), color="0.8", linewidth=0.4)
    c = None if colors is None else np.clip(np.asarray(colors).reshape(-1, 3), 0, 1)
    ax.scatter(d[:, 0], d[:, 1], d[:, 2], s=4, c=c)
    ax.set_box_aspect((1, 1, 1))
    for set_lim in (ax.set_xlim, ax.set_ylim, ax.set_zlim):
        set_lim(-1, 1)
    return _save(fig, path)
