"""Observation-to-command control in two modes.

Discrete mode walks a precomputed plan node by node, tracking the current
node in the image and hopping once the tracked segment looks close enough
(area ratio). Continuous mode skips explicit plans: every query segment
votes on the yaw with a weight that decays with its remaining hop distance
to the goal, and the run ends when any matched segment reaches distance 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .graph import MapGraph
from .ingest import FrameMeta, SegmentRecord
from .localize import localize_frame, localize_segments
from .planning import Plan, PlanStrategy, cost_to_all

WEIGHT_MODES = ("inverse", "exp")


@dataclass
class ControlParams:
    theta_track: float = 0.5
    rho_hop: float = 0.9
    kp: float = 0.5
    ki: float = 0.0
    kd: float = 0.0
    v_forward: float = 0.4
    submap_window: int = 3
    weight_mode: str = "inverse"
    explore_step: float = 0.5   # lost-state yaw offset magnitude, normalized
    explore_sign: int = 1       # lost-state turn direction, fixed per trial

    def __post_init__(self):
        if self.rho_hop <= 0:
            raise ValueError(f"rho_hop must be > 0, got {self.rho_hop}")
        for name in ("kp", "ki", "kd"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}")
        if self.explore_sign not in (-1, 1):
            raise ValueError("explore_sign must be +1 or -1")


@dataclass(frozen=True)
class ControlCommand:
    state: str  # lost | track | hop | done
    yaw_offset_norm: float
    forward: bool
    min_path_len: float | None = None
    matched_node: int | None = None


@dataclass
class PidState:
    integral: float = 0.0
    prev_error: float | None = None


def pid_yaw(offset_norm: float, p: ControlParams, state: PidState, dt: float = 1.0) -> float:
    """Yaw rate from the normalized offset; defaults reduce to kp * offset."""
    state.integral += offset_norm * dt
    deriv = 0.0 if state.prev_error is None else (offset_norm - state.prev_error) / dt
    state.prev_error = offset_norm
    return p.kp * offset_norm + p.ki * state.integral + p.kd * deriv


def _offset_norm(centroid_x: float, width: int) -> float:
    half = width / 2.0
    return (centroid_x - half) / half


def _lost(p: ControlParams) -> ControlCommand:
    return ControlCommand(state="lost",
                          yaw_offset_norm=p.explore_sign * p.explore_step,
                          forward=False)


def discrete_step(plan: Plan, cursor: int, query: Sequence[SegmentRecord],
                  meta: FrameMeta, g: MapGraph,
                  p: ControlParams) -> tuple[ControlCommand, int]:
    """One tick of the plan-walking state machine.

    The cursor node's layer-0 descriptor is matched against the query
    segments; a weak best match means lost (explore in place), otherwise
    track toward the match, and hop (advance the cursor) once the observed
    segment's area reaches rho_hop of the mapped one. A cursor past the
    last plan node reports done and never moves again.
    """
    if cursor >= len(plan.steps):
        return ControlCommand(state="done", yaw_offset_norm=0.0, forward=False), cursor
    if not query:
        return _lost(p), cursor
    ref = g.nodes[plan.steps[cursor]]
    sims = [float(rec.descriptor @ ref.descriptors[0]) for rec in query]
    best = int(np.argmax(sims))
    if sims[best] < p.theta_track:
        return _lost(p), cursor
    rec = query[best]
    yaw = _offset_norm(rec.centroid_x, meta.image_width)
    if rec.area_px / ref.area_px >= p.rho_hop:
        return ControlCommand(state="hop", yaw_offset_norm=yaw, forward=True,
                              matched_node=ref.node_id), cursor + 1
    return ControlCommand(state="track", yaw_offset_norm=yaw, forward=True,
                          matched_node=ref.node_id), cursor


def _submap_nodes(g: MapGraph, frame: int, window: int) -> list[int]:
    n_frames = g.n_frames
    if g.config.pano_wrap:
        wanted = {(frame + d) % n_frames for d in range(-window, window + 1)}
    else:
        wanted = set(range(max(0, frame - window), min(n_frames, frame + window + 1)))
    return [n.node_id for n in g.nodes if n.frame_id in wanted]


def continuous_step(query: Sequence[SegmentRecord], meta: FrameMeta, g: MapGraph,
                    goal: int, p: ControlParams,
                    strategy: PlanStrategy = PlanStrategy.INTRA_DT,
                    cost_from_goal: Sequence[float] | None = None) -> ControlCommand:
    """One tick of submap-weighted visual servoing toward the goal node.

    Every query segment matches its best node inside the localized frame's
    submap; each match pulls the yaw toward itself with weight w(d) where d
    is its hop distance to the goal (w = 1/(1+d), or exp(-d)). Done the
    moment any matched segment sits at distance 0.
    """
    matches = localize_segments(query, g, layer=0, theta_loc=p.theta_track)
    frame = localize_frame(matches, g)
    if frame is None:
        return _lost(p)
    if cost_from_goal is None:
        cost_from_goal = cost_to_all(g, goal, strategy)
    submap = _submap_nodes(g, frame, p.submap_window)
    sub_mat = np.stack([g.nodes[i].descriptors[0] for i in submap])

    num = 0.0
    den = 0.0
    min_d: float | None = None
    best_node = None
    for rec in query:
        sims = sub_mat @ rec.descriptor
        j = int(np.argmax(sims))
        if float(sims[j]) < p.theta_track:
            continue
        node_id = submap[j]
        d = float(cost_from_goal[node_id])
        if not np.isfinite(d):
            continue
        w = 1.0 / (1.0 + d) if p.weight_mode == "inverse" else float(np.exp(-d))
        num += w * _offset_norm(rec.centroid_x, meta.image_width)
        den += w
        if min_d is None or d < min_d:
            min_d = d
            best_node = node_id
    if min_d is None:
        return _lost(p)
    yaw = num / den
    if min_d == 0:
        return ControlCommand(state="done", yaw_offset_norm=yaw, forward=False,
                              min_path_len=0.0, matched_node=best_node)
    return ControlCommand(state="track", yaw_offset_norm=yaw, forward=True,
                          min_path_len=min_d, matched_node=best_node)


def write_command_log(rows: Sequence[dict], path: str | Path) -> None:
    """Per-tick command log as CSV."""
    cols = ["tick", "state", "yaw_offset_norm", "yaw_rate", "forward",
            "cursor", "min_path_len"]
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in rows:
            w.writerow({c: row.get(c, "") for c in cols})
