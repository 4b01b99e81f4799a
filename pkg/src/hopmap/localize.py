"""Node retrieval against the map, frame voting, and the recall sweep.

Retrieval is an exact exhaustive scan: desk-scale maps make approximate
indexing pointless and exactness keeps every result oracle-checkable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import QueryError
from .geometry import triangulate
from .graph import MapGraph, MapNode, _build_adjacency, aggregate_descriptors
from .ingest import FrameSet, SegmentRecord

THETA_LOC_DEFAULT = 0.5
RECALL_RADIUS_DEFAULT = 5


@dataclass(frozen=True)
class NodeMatch:
    query_frame_id: int
    query_segment_id: int
    map_node: int
    similarity: float
    layer: int


def aggregate_query_frame(records: Sequence[SegmentRecord], layer: int,
                          intra_mode: str = "delaunay",
                          renormalize: bool = True) -> np.ndarray:
    """Layer-l descriptors for one query frame, (n, dim).

    The query graph has only the frame's own intra edges; no inter edges
    exist at query time, so averaging runs over the triangulation (or
    complete-graph) neighborhoods alone.
    """
    if not records:
        return np.zeros((0, 0))
    h = np.stack([r.descriptor for r in records])
    if layer == 0:
        return h
    n = len(records)
    if intra_mode == "complete":
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    else:
        pts = np.array([[r.centroid_x, r.centroid_y] for r in records])
        edges, _ = triangulate(pts)
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    for _ in range(layer):
        nxt = np.empty_like(h)
        for i in range(n):
            nxt[i] = h[[i] + adj[i]].mean(axis=0)
        if renormalize:
            norms = np.linalg.norm(nxt, axis=1, keepdims=True)
            nxt = nxt / np.where(norms == 0, 1.0, norms)
        h = nxt
    return h


def localize_segments(query: Sequence[SegmentRecord], g: MapGraph,
                      layer: int = 0,
                      theta_loc: float | None = THETA_LOC_DEFAULT) -> list[NodeMatch]:
    """Best map node per query segment at the given layer.

    Matches with similarity not exceeding theta_loc are dropped; pass
    theta_loc=None to keep every argmax match (recall evaluation does).
    """
    if g.n_nodes == 0:
        raise QueryError("cannot localize against an empty map")
    n_layers = len(g.nodes[0].descriptors)
    if not 0 <= layer < n_layers:
        raise QueryError(
            f"layer {layer} not available (map has layers 0..{n_layers - 1})")
    if not query:
        return []
    qh = aggregate_query_frame(query, layer, g.config.intra_mode,
                               g.config.renormalize_layers)
    mh = g.descriptor_matrix(layer)
    sims = qh @ mh.T
    out: list[NodeMatch] = []
    for i, rec in enumerate(query):
        j = int(np.argmax(sims[i]))
        s = float(sims[i, j])
        if theta_loc is not None and s <= theta_loc:
            continue
        out.append(NodeMatch(query_frame_id=rec.frame_id,
                             query_segment_id=rec.segment_id,
                             map_node=j, similarity=s, layer=layer))
    return out


def localize_frame(matches: Sequence[NodeMatch], g: MapGraph) -> int | None:
    """Majority frame vote over matches; None signals a lost localization.

    Ties go to the frame with the higher summed similarity, then to the
    lower frame id so the vote is fully deterministic.
    """
    if not matches:
        return None
    counts: dict[int, int] = {}
    sim_sum: dict[int, float] = {}
    for m in matches:
        f = g.nodes[m.map_node].frame_id
        counts[f] = counts.get(f, 0) + 1
        sim_sum[f] = sim_sum.get(f, 0.0) + m.similarity
    return min(counts, key=lambda f: (-counts[f], -sim_sum[f], f))


def _filtered_graph(g: MapGraph, theta: float) -> MapGraph:
    """Copy of g keeping intra edges plus inter edges above theta.

    Nodes are copied (layer 0 only) so re-aggregating the filtered graph
    never clobbers the original graph's descriptor layers.
    """
    edges = [e for e in g.edges if e.kind == "intra" or e.similarity > theta]
    nodes = [
        MapNode(node_id=n.node_id, frame_id=n.frame_id, segment_id=n.segment_id,
                centroid_x=n.centroid_x, centroid_y=n.centroid_y, area_px=n.area_px,
                bbox=n.bbox, descriptors=[n.descriptors[0]],
                semantic_vector=n.semantic_vector,
                gt_instance=n.gt_instance, gt_category=n.gt_category)
        for n in g.nodes
    ]
    return MapGraph(nodes=nodes, edges=edges,
                    adjacency=_build_adjacency(g.n_nodes, edges),
                    config=g.config, frames=g.frames)


def eval_recall(query_fs: FrameSet, g: MapGraph,
                gt_frame_of_query: Mapping[int, int],
                layer_grid: Sequence[int],
                theta_grid: Sequence[float],
                radius: int = RECALL_RADIUS_DEFAULT) -> np.ndarray:
    """Recall@1 table, shape (len(layer_grid), len(theta_grid)).

    Each theta column refilters the map's inter edges at that threshold and
    re-runs aggregation before matching; a query segment counts as correct
    when its matched node's frame is within `radius` frames of the query
    frame's ground-truth map frame. Layer-0 rows are theta-independent by
    construction (no aggregation happens).
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    l_max = max(layer_grid, default=0)
    table = np.zeros((len(layer_grid), len(theta_grid)))
    for ci, theta in enumerate(theta_grid):
        sub = _filtered_graph(g, theta)
        aggregate_descriptors(sub, l_max=l_max, renormalize=g.config.renormalize_layers)
        for ri, layer in enumerate(layer_grid):
            correct = 0
            total = 0
            for meta in query_fs.frames:
                records = query_fs.records_of(meta.frame_id)
                if not records:
                    continue
                gt = gt_frame_of_query[meta.frame_id]
                for m in localize_segments(records, sub, layer=layer, theta_loc=None):
                    total += 1
                    if abs(sub.nodes[m.map_node].frame_id - gt) <= radius:
                        correct += 1
            table[ri, ci] = correct / total if total else 0.0
    return table


def write_recall_csv(table: np.ndarray, layer_grid: Sequence[int],
                     theta_grid: Sequence[float], path: str | Path) -> None:
    """CSV with one row per layer and one column per theta."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["layer"] + [f"theta={t:g}" for t in theta_grid])
        for ri, layer in enumerate(layer_grid):
            w.writerow([layer] + [f"{table[ri, ci]:.6f}" for ci in range(len(theta_grid))])
