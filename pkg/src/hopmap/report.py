"""Figure rendering for maps, plans, recall tables and trial logs.

All functions write PNG files and return the path; the Agg backend is
forced so rendering works headless.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .graph import MapGraph
from .planning import Plan
from .simworld import TrialResult

_DPI = 150


def _node_xy(g: MapGraph, node_id: int) -> tuple[float, float]:
    """Layout: frame index on x, image column (normalized) on y."""
    n = g.nodes[node_id]
    width = g.frames[n.frame_id].image_width if g.frames else 640
    return float(n.frame_id), n.centroid_x / width


def fig_map(g: MapGraph, path: str | Path) -> Path:
    """The map graph laid out by (frame, image column)."""
    fig, ax = plt.subplots(figsize=(10, 4))
    for e in g.edges:
        xa, ya = _node_xy(g, e.a)
        xb, yb = _node_xy(g, e.b)
        if e.kind == "intra":
            ax.plot([xa, xb], [ya, yb], color="0.8", lw=0.6, zorder=1)
        else:
            ax.plot([xa, xb], [ya, yb], color="tab:blue", lw=0.8, alpha=0.6, zorder=2)
    xs, ys = zip(*(_node_xy(g, n.node_id) for n in g.nodes))
    ax.scatter(xs, ys, s=12, c="k", zorder=3)
    ax.set_xlabel("frame")
    ax.set_ylabel("image column (fraction of width)")
    ax.set_title(f"{g.n_nodes} nodes, {len(g.edges)} edges")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def fig_plan(g: MapGraph, plan: Plan, path: str | Path) -> Path:
    """Plan overlay: the hop sequence drawn over a faint map."""
    fig, ax = plt.subplots(figsize=(10, 4))
    for e in g.edges:
        xa, ya = _node_xy(g, e.a)
        xb, yb = _node_xy(g, e.b)
        ax.plot([xa, xb], [ya, yb], color="0.9", lw=0.5, zorder=1)
    xs, ys = zip(*(_node_xy(g, n.node_id) for n in g.nodes))
    ax.scatter(xs, ys, s=8, c="0.6", zorder=2)
    px, py = zip(*(_node_xy(g, nid) for nid in plan.steps))
    for k, kind in enumerate(plan.edge_kinds):
        color = "tab:green" if kind == "inter" else "tab:red"
        ax.plot(px[k:k + 2], py[k:k + 2], color=color, lw=2.0, zorder=3)
    ax.scatter(px, py, s=30, c="k", zorder=4)
    ax.scatter([px[0]], [py[0]], s=90, marker="^", c="tab:green", zorder=5, label="source")
    ax.scatter([px[-1]], [py[-1]], s=90, marker="*", c="tab:red", zorder=5, label="target")
    ax.legend(loc="best")
    ax.set_xlabel("frame")
    ax.set_ylabel("image column (fraction of width)")
    ax.set_title(f"plan cost {plan.cost} over {len(plan.steps)} nodes")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def fig_recall_heatmap(table: np.ndarray, layer_grid: Sequence[int],
                       theta_grid: Sequence[float], path: str | Path) -> Path:
    """Recall@1 heatmap, layers on rows and thresholds on columns."""
    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(theta_grid),
                                    1.0 + 0.8 * len(layer_grid)))
    im = ax.imshow(table, vmin=0.0, vmax=1.0, cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(theta_grid)), [f"{t:g}" for t in theta_grid])
    ax.set_yticks(range(len(layer_grid)), [str(l) for l in layer_grid])
    ax.set_xlabel("inter-edge threshold")
    ax.set_ylabel("aggregation layer")
    for ri in range(table.shape[0]):
        for ci in range(table.shape[1]):
            ax.text(ci, ri, f"{table[ri, ci]:.2f}", ha="center", va="center",
                    color="w" if table[ri, ci] < 0.6 else "k", fontsize=8)
    fig.colorbar(im, ax=ax, label="recall@1")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def fig_trial(result: TrialResult, path: str | Path) -> Path:
    """Per-tick yaw offset and remaining hop distance for one trial."""
    ticks = [row["tick"] for row in result.command_log]
    yaw = [row["yaw_offset_norm"] for row in result.command_log]
    dmin = [row["min_path_len"] if row["min_path_len"] is not None else math.nan
            for row in result.command_log]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 5), sharex=True)
    ax1.plot(ticks, yaw, lw=1.0)
    ax1.axhline(0.0, color="0.7", lw=0.5)
    ax1.set_ylabel("yaw offset (norm)")
    ax1.set_title("success" if result.success else "failure")
    ax2.plot(ticks, dmin, lw=1.0, color="tab:orange")
    ax2.set_ylabel("min hops to goal")
    ax2.set_xlabel("tick")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def fig_trials_summary(results: Sequence[TrialResult], path: str | Path) -> Path:
    """Steps per trial, colored by outcome."""
    fig, ax = plt.subplots(figsize=(8, 3.5))
    idx = np.arange(len(results))
    steps = [r.steps_taken for r in results]
    colors = ["tab:green" if r.success else "tab:red" for r in results]
    ax.bar(idx, steps, color=colors)
    ax.set_xticks(idx)
    ax.set_xlabel("trial")
    ax.set_ylabel("steps taken")
    n_ok = sum(r.success for r in results)
    ax.set_title(f"{n_ok}/{len(results)} trials succeeded")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
