"""Hop-plan generation: Dijkstra over 0/1 edge weights plus query resolution.

Inter-image edges cost 0 and intra-image edges cost 1, so a plan's cost is
the number of times it is forced to hop between segment tracks. Three edge
sets are supported: the map as built (IntraDT), complete intra subgraphs
(IntraAll), and unthresholded inter matching over Delaunay intra (DAAll).
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import PlanningError, QueryError
from .graph import (GraphConfig, MapEdge, MapGraph, build_inter_edges,
                    build_intra_edges_complete, build_intra_edges_delaunay)

EDGE_WEIGHT = {"inter": 0, "intra": 1}


class PlanStrategy(Enum):
    INTRA_DT = "intra-dt"
    INTRA_ALL = "intra-all"
    DA_ALL = "da-all"


@dataclass(frozen=True)
class Plan:
    steps: tuple[int, ...]
    edge_kinds: tuple[str, ...]
    cost: int

    def __post_init__(self):
        if len(self.edge_kinds) != max(len(self.steps) - 1, 0):
            raise ValueError("edge_kinds must have one entry per transition")


def plan_cost(p: Plan) -> int:
    """Count of intra transitions (inter hops are free)."""
    return sum(1 for k in p.edge_kinds if k == "intra")


def strategy_edges(g: MapGraph, strategy: PlanStrategy) -> list[MapEdge]:
    """The edge set the given strategy plans over."""
    if strategy is PlanStrategy.INTRA_DT:
        if g.config.intra_mode == "delaunay":
            return list(g.edges)
        edges = [e for e in g.edges if e.kind == "inter"]
        for t in range(g.n_frames):
            edges.extend(build_intra_edges_delaunay(g.nodes_of_frame(t)))
        return edges
    if strategy is PlanStrategy.INTRA_ALL:
        edges = [e for e in g.edges if e.kind == "inter"]
        for t in range(g.n_frames):
            edges.extend(build_intra_edges_complete(g.nodes_of_frame(t)))
        return edges
    # DAAll: every node keeps its argmax match per window gap (theta = -inf),
    # over the Delaunay intra edges.
    intra = [e for e in g.edges if e.kind == "intra"]
    if g.config.intra_mode != "delaunay":
        intra = []
        for t in range(g.n_frames):
            intra.extend(build_intra_edges_delaunay(g.nodes_of_frame(t)))
    cfg = replace(g.config, theta=-np.inf)
    inter = (build_inter_edges(g.nodes, g.n_frames, cfg)
             if g.n_frames > 1 else [])
    return intra + inter


def _adjacency_with_kinds(n: int, edges: Sequence[MapEdge]) -> list[list[tuple[int, str]]]:
    adj: list[dict[int, str]] = [{} for _ in range(n)]
    for e in edges:
        # An inter and an intra edge can never share a pair, so last-wins is safe.
        adj[e.a][e.b] = e.kind
        adj[e.b][e.a] = e.kind
    return [sorted(d.items()) for d in adj]


def _dijkstra(adj: list[list[tuple[int, str]]], source: int):
    """0/1-weight Dijkstra with deterministic tie-breaking.

    Nodes settle exactly once in (cost, -streak, id) pop order, which keeps
    the cost optimal (weights are non-negative) and the run terminating:
    chasing a longer trailing inter streak around a zero-weight cycle would
    otherwise relax forever. Among equal-cost relaxations into an unsettled
    node, the longer run of trailing inter transitions wins, then the lower
    predecessor id. Returns (dist, pred, pred_kind); unreachable nodes keep
    dist = inf.
    """
    n = len(adj)
    dist = [float("inf")] * n
    streak = [-1] * n
    pred = [-1] * n
    pred_kind = [""] * n
    settled = [False] * n
    dist[source] = 0
    streak[source] = 0
    heap: list[tuple[float, int, int]] = [(0.0, 0, source)]
    while heap:
        _, _, u = heapq.heappop(heap)
        if settled[u]:
            continue
        settled[u] = True
        for v, kind in adj[u]:
            if settled[v]:
                continue
            nd = dist[u] + EDGE_WEIGHT[kind]
            ns = streak[u] + 1 if kind == "inter" else 0
            better = (nd < dist[v]
                      or (nd == dist[v] and ns > streak[v])
                      or (nd == dist[v] and ns == streak[v] and pred[v] > u))
            if better:
                dist[v] = nd
                streak[v] = ns
                pred[v] = u
                pred_kind[v] = kind
                heapq.heappush(heap, (nd, -ns, v))
    return dist, pred, pred_kind


def plan(g: MapGraph, source: int, target: int,
         strategy: PlanStrategy = PlanStrategy.INTRA_DT) -> Plan:
    """Minimum-cost hop plan from source to target under the strategy."""
    for name, node in (("source", source), ("target", target)):
        if not (0 <= node < g.n_nodes):
            raise PlanningError(f"{name} node {node} does not exist (map has {g.n_nodes} nodes)")
    if source == target:
        return Plan(steps=(source,), edge_kinds=(), cost=0)
    adj = _adjacency_with_kinds(g.n_nodes, strategy_edges(g, strategy))
    dist, pred, pred_kind = _dijkstra(adj, source)
    if dist[target] == float("inf"):
        raise PlanningError(f"target node {target} unreachable from {source}")
    steps = [target]
    kinds = []
    while steps[-1] != source:
        kinds.append(pred_kind[steps[-1]])
        steps.append(pred[steps[-1]])
    steps.reverse()
    kinds.reverse()
    return Plan(steps=tuple(steps), edge_kinds=tuple(kinds), cost=int(dist[target]))


def cost_to_all(g: MapGraph, source: int,
                strategy: PlanStrategy = PlanStrategy.INTRA_DT) -> list[float]:
    """Plan cost from source to every node (inf where unreachable)."""
    if not (0 <= source < g.n_nodes):
        raise PlanningError(f"source node {source} does not exist (map has {g.n_nodes} nodes)")
    adj = _adjacency_with_kinds(g.n_nodes, strategy_edges(g, strategy))
    dist, _, _ = _dijkstra(adj, source)
    return dist


# ---------------------------------------------------------------------------
# Query resolution
# ---------------------------------------------------------------------------

def resolve_text_query(text_vector: np.ndarray, g: MapGraph, k: int = 3) -> list[int]:
    """Top-k node ids by semantic similarity, descending.

    Nodes without a semantic vector are skipped; equal similarities order
    by node id so results are reproducible.
    """
    if k < 1:
        raise QueryError(f"k must be >= 1, got {k}")
    vec = np.asarray(text_vector, dtype=np.float64)
    scored = [(float(n.semantic_vector @ vec), n.node_id)
              for n in g.nodes if n.semantic_vector is not None]
    if not scored:
        raise QueryError("no node carries a semantic vector; text queries unavailable")
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [node_id for _, node_id in scored[:k]]


@dataclass(frozen=True)
class RelationalQuery:
    """Find the target object described relative to a reference object."""

    target_vector: np.ndarray
    reference_vector: np.ndarray
    k: int = 3

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


def resolve_relational_query(q: RelationalQuery, g: MapGraph,
                             strategy: PlanStrategy = PlanStrategy.INTRA_DT) -> tuple[int, Plan]:
    """Pick the goal among target candidates by shortest path to a reference.

    All k x k candidate pairs are planned; the minimum-cost pair wins, ties
    broken by the higher sum of the two retrieval similarities, then by
    lower target node id, then lower reference node id.
    """
    targets = resolve_text_query(q.target_vector, g, q.k)
    refs = resolve_text_query(q.reference_vector, g, q.k)
    tvec = np.asarray(q.target_vector, dtype=np.float64)
    rvec = np.asarray(q.reference_vector, dtype=np.float64)
    best = None
    best_key = None
    for t in targets:
        for r in refs:
            p = plan(g, r, t, strategy)
            sim_sum = float(g.nodes[t].semantic_vector @ tvec) \
                + float(g.nodes[r].semantic_vector @ rvec)
            key = (p.cost, -sim_sum, t, r)
            if best_key is None or key < best_key:
                best_key = key
                best = (t, p)
    assert best is not None
    return best


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def plan_to_json(p: Plan, g: MapGraph, strategy: PlanStrategy) -> dict:
    """Plan as a JSON-ready dict with per-step frame and centroid context."""
    return {
        "format": "hopmap-plan/1",
        "strategy": strategy.value,
        "cost": p.cost,
        "steps": [
            {
                "node_id": nid,
                "frame_id": g.nodes[nid].frame_id,
                "segment_id": g.nodes[nid].segment_id,
                "centroid_x": g.nodes[nid].centroid_x,
                "centroid_y": g.nodes[nid].centroid_y,
            }
            for nid in p.steps
        ],
        "edge_kinds": list(p.edge_kinds),
    }


def write_plan_json(p: Plan, g: MapGraph, strategy: PlanStrategy,
                    path: str | Path) -> None:
    Path(path).write_text(json.dumps(plan_to_json(p, g, strategy), indent=2) + "\n",
                          encoding="utf-8")
