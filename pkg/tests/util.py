"""Shared fixture builders for the test suite."""

from __future__ import annotations

import numpy as np

from hopmap.graph import GraphConfig, MapEdge, MapGraph, MapNode, _build_adjacency
from hopmap.ingest import FrameMeta, FrameSet, build_frameset, make_record


def unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def random_frameset(rng: np.random.Generator, n_frames: int,
                    nodes_per_frame: list[int], dim: int = 8,
                    pano: bool = False, width: int = 640,
                    height: int = 480) -> FrameSet:
    metas = []
    records = []
    for t in range(n_frames):
        metas.append(FrameMeta(frame_id=t, image_width=width, image_height=height))
        for s in range(nodes_per_frame[t]):
            vec = unit(rng.normal(size=dim))
            cx = float(rng.uniform(10, width - 10))
            cy = float(rng.uniform(10, height - 10))
            area = float(rng.uniform(700, 5000))
            records.append(make_record(
                frame_id=t, segment_id=s, centroid_x=cx, centroid_y=cy,
                area_px=area, bbox=(cx - 5, cy - 5, cx + 5, cy + 5),
                descriptor=vec))
    return build_frameset(metas, records, pano_wrap=pano)


def make_node(node_id: int, frame_id: int, descriptor, segment_id: int | None = None,
              cx: float = 100.0, cy: float = 100.0, area: float = 1000.0,
              semantic=None) -> MapNode:
    d = np.asarray(descriptor, dtype=np.float64)
    return MapNode(node_id=node_id, frame_id=frame_id,
                   segment_id=node_id if segment_id is None else segment_id,
                   centroid_x=cx, centroid_y=cy, area_px=area,
                   bbox=(cx - 5, cy - 5, cx + 5, cy + 5),
                   descriptors=[d],
                   semantic_vector=None if semantic is None
                   else np.asarray(semantic, dtype=np.float64))


def graph_from_edges(n: int, edge_spec: list[tuple[int, int, str]],
                     dim: int = 6, rng: np.random.Generator | None = None,
                     nodes: list[MapNode] | None = None) -> MapGraph:
    """Assemble a MapGraph directly; algorithm-level tests bypass build_map."""
    rng = rng or np.random.default_rng(0)
    if nodes is None:
        nodes = [make_node(i, i // 3, unit(rng.normal(size=dim))) for i in range(n)]
    edges = [MapEdge(a=min(a, b), b=max(a, b), kind=kind,
                     similarity=1.0 if kind == "intra" else 0.9)
             for a, b, kind in edge_spec]
    return MapGraph(nodes=nodes, edges=edges,
                    adjacency=_build_adjacency(n, edges),
                    config=GraphConfig(), frames=[])


def random_connected_graph(rng: np.random.Generator, max_nodes: int = 12,
                           extra_edges: int = 6) -> MapGraph:
    """Random connected graph with mixed edge kinds (spanning tree + extras)."""
    n = int(rng.integers(2, max_nodes + 1))
    kinds = ["intra", "inter"]
    spec: list[tuple[int, int, str]] = []
    seen = set()
    for v in range(1, n):
        u = int(rng.integers(0, v))
        spec.append((u, v, kinds[int(rng.integers(2))]))
        seen.add((u, v))
    for _ in range(int(rng.integers(0, extra_edges + 1))):
        u, v = sorted(int(x) for x in rng.integers(0, n, 2))
        if u == v or (u, v) in seen:
            continue
        seen.add((u, v))
        spec.append((u, v, kinds[int(rng.integers(2))]))
    return graph_from_edges(n, spec, rng=rng)


def dyadic_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    """Uniform draw on the 1/64 grid; mirror reflection stays float-exact."""
    return float(rng.integers(int(lo * 64), int(hi * 64) + 1)) / 64.0
