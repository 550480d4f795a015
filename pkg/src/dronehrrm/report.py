"""Optional PNG figures for the command-line report path.

The CSV files are the primary output; these figures are rendered next to
them when ``--figures`` is given. matplotlib is imported lazily so the rest
of the package works without a display or a plotting backend.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .kpi import HeatmapGrid


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    # no timestamp in the metadata, so reruns give identical files
    fig.savefig(path, dpi=120, metadata={"Software": None})
    fig.clf()
    return path


def heatmap_figure(grid: HeatmapGrid, path: str | Path, title: str = "",
                   bs_positions: Sequence | None = None) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4.4))
    w, h = grid.area
    im = ax.imshow(grid.counts, origin="lower", extent=(0, w, 0, h), cmap="viridis",
                   interpolation="nearest")
    fig.colorbar(im, ax=ax, label="handovers")
    if bs_positions is not None:
        xy = np.asarray(bs_positions, dtype=float)
        ax.scatter(xy[:, 0], xy[:, 1], marker="^", s=60, c="red", edgecolors="white", label="BS")
        ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(title or f"handover positions ({grid.total} total)")
    fig.tight_layout()
    out = _save(fig, Path(path))
    plt.close(fig)
    return out


def sweep_figure(columns: Sequence[str], rows: Sequence[Sequence], path: str | Path) -> Path:
    """Grouped bars of the max-normalized KPIs per sweep value."""
    plt = _pyplot()
    norm_cols = [i for i, c in enumerate(columns) if c.endswith("_norm")]
    labels = [str(r[1]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 3.6))
    width = 0.8 / max(len(norm_cols), 1)
    x = np.arange(len(rows))
    for j, ci in enumerate(norm_cols):
        ax.bar(x + j * width, [float(r[ci]) for r in rows], width,
               label=columns[ci].removesuffix("_norm"))
    ax.set_xticks(x + width * (len(norm_cols) - 1) / 2, labels)
    ax.set_xlabel(str(rows[0][0]) if rows else "")
    ax.set_ylabel("normalized KPI")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    out = _save(fig, Path(path))
    plt.close(fig)
    return out


def training_figure(rewards: Sequence[float], handovers: Sequence[float], path: str | Path) -> Path:
    plt = _pyplot()
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(6, 4.5), sharex=True)
    ep = np.arange(len(rewards))
    a1.plot(ep, rewards, lw=0.8)
    a1.set_ylabel("mean reward")
    a2.plot(ep, handovers, lw=0.8, color="tab:orange")
    a2.set_ylabel("handovers")
    a2.set_xlabel("episode")
    fig.tight_layout()
    out = _save(fig, Path(path))
    plt.close(fig)
    return out
