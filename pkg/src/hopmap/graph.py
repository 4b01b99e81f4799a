"""Topological segment map: nodes, intra/inter edges, descriptor aggregation.

The map is an undirected graph whose nodes are image segments. Segments of
one frame are linked by Delaunay (or complete) intra edges; segments of
nearby frames are linked by greedy descriptor matching, with a guaranteed
fallback edge between every consecutive frame pair so the graph always comes
out as a single connected component.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import IngestError
from .geometry import triangulate
from .ingest import FrameMeta, FrameSet

FORMAT_GRAPH = "hopmap-graph/1"

INTRA_MODES = ("delaunay", "complete")


@dataclass
class MapNode:
    """One mapped segment with its per-layer descriptors."""

    node_id: int
    frame_id: int
    segment_id: int
    centroid_x: float
    centroid_y: float
    area_px: float
    bbox: tuple[float, float, float, float]
    descriptors: list[np.ndarray]
    semantic_vector: np.ndarray | None = None
    gt_instance: int | None = None
    gt_category: int | None = None


@dataclass(frozen=True)
class MapEdge:
    """Undirected edge; intra edges carry similarity 1.0 as a placeholder."""

    a: int
    b: int
    kind: str  # "intra" | "inter"
    similarity: float = 1.0


@dataclass(frozen=True)
class GraphConfig:
    theta: float = 0.7
    window: tuple[int, ...] = (1, 2, 3)
    intra_mode: str = "delaunay"
    l_max: int = 2
    renormalize_layers: bool = True
    pano_wrap: bool = False

    def __post_init__(self):
        if not self.window:
            raise ValueError("window must be nonempty")
        if any(g <= 0 for g in self.window):
            raise ValueError(f"window gaps must be positive, got {self.window}")
        if self.intra_mode not in INTRA_MODES:
            raise ValueError(f"intra_mode must be one of {INTRA_MODES}, got {self.intra_mode!r}")
        if self.l_max < 0:
            raise ValueError(f"l_max must be >= 0, got {self.l_max}")
        object.__setattr__(self, "window", tuple(sorted(set(self.window))))


@dataclass
class MapGraph:
    nodes: list[MapNode]
    edges: list[MapEdge]
    adjacency: list[list[int]]
    config: GraphConfig
    frames: list[FrameMeta] = field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_frames(self) -> int:
        if self.frames:
            return len(self.frames)
        return 1 + max((n.frame_id for n in self.nodes), default=-1)

    def neighbors(self, node_id: int) -> list[int]:
        return self.adjacency[node_id]

    def nodes_of_frame(self, frame_id: int) -> list[MapNode]:
        return [n for n in self.nodes if n.frame_id == frame_id]

    def node_by_segment(self, frame_id: int, segment_id: int) -> MapNode:
        for n in self.nodes:
            if n.frame_id == frame_id and n.segment_id == segment_id:
                return n
        raise KeyError((frame_id, segment_id))

    def descriptor_matrix(self, layer: int) -> np.ndarray:
        """(n_nodes, dim) array of layer-l descriptors in node_id order."""
        return np.stack([n.descriptors[layer] for n in self.nodes])

    def edge_index(self) -> dict[tuple[int, int], MapEdge]:
        return {(min(e.a, e.b), max(e.a, e.b)): e for e in self.edges}


# ---------------------------------------------------------------------------
# Edge construction
# ---------------------------------------------------------------------------

def build_intra_edges_delaunay(nodes_of_frame: Sequence[MapNode]) -> list[MapEdge]:
    """Delaunay edges over the frame's centroids (path/complete fallbacks
    for degenerate inputs are handled by the triangulation helper)."""
    _require_single_frame(nodes_of_frame)
    pts = np.array([[n.centroid_x, n.centroid_y] for n in nodes_of_frame], dtype=np.float64)
    if len(pts) == 0:
        return []
    edges, _ = triangulate(pts)
    ids = [n.node_id for n in nodes_of_frame]
    return [MapEdge(a=min(ids[i], ids[j]), b=max(ids[i], ids[j]), kind="intra") for i, j in edges]


def build_intra_edges_complete(nodes_of_frame: Sequence[MapNode]) -> list[MapEdge]:
    """All-pairs edges within one frame."""
    _require_single_frame(nodes_of_frame)
    ids = sorted(n.node_id for n in nodes_of_frame)
    return [MapEdge(a=ids[i], b=ids[j], kind="intra")
            for i in range(len(ids)) for j in range(i + 1, len(ids))]


def _require_single_frame(nodes: Sequence[MapNode]) -> None:
    frames = {n.frame_id for n in nodes}
    if len(frames) > 1:
        raise ValueError(f"intra edges require a single frame, got frames {sorted(frames)}")


def build_inter_edges(nodes: Sequence[MapNode], n_frames: int, cfg: GraphConfig) -> list[MapEdge]:
    """Greedy cross-frame matching plus the consecutive-pair fallback.

    For each node i of frame t and each gap g in cfg.window, the best match
    j in frame t+g gains an edge iff the dot similarity exceeds cfg.theta.
    Afterwards any consecutive pair (t, t+1) left without an edge gets the
    single best pair edge regardless of the threshold, which guarantees the
    final map is connected. With pano_wrap, frames wrap modulo n_frames.
    """
    by_frame: dict[int, list[MapNode]] = {t: [] for t in range(n_frames)}
    for n in nodes:
        by_frame[n.frame_id].append(n)
    for t in range(n_frames):
        if not by_frame[t]:
            raise IngestError(f"frame {t} has no segments; the map cannot be connected through it")

    mats = {t: np.stack([n.descriptors[0] for n in by_frame[t]]) for t in range(n_frames)}

    best: dict[tuple[int, int], float] = {}

    def _add(u: int, v: int, sim: float) -> None:
        key = (min(u, v), max(u, v))
        if key not in best or sim > best[key]:
            best[key] = sim

    def _target(t: int, g: int) -> int | None:
        if cfg.pano_wrap:
            tt = (t + g) % n_frames
            return None if tt == t else tt
        tt = t + g
        return tt if tt < n_frames else None

    for t in range(n_frames):
        for g in cfg.window:
            tt = _target(t, g)
            if tt is None:
                continue
            sims = mats[t] @ mats[tt].T
            picks = np.argmax(sims, axis=1)
            for i, j in enumerate(picks):
                s = float(sims[i, j])
                if s > cfg.theta:
                    _add(by_frame[t][i].node_id, by_frame[tt][int(j)].node_id, s)

    # Fallback: every consecutive frame pair must end up linked.
    last = n_frames if cfg.pano_wrap else n_frames - 1
    frame_of = {n.node_id: n.frame_id for n in nodes}
    linked: set[tuple[int, int]] = set()
    for (u, v) in best:
        fu, fv = frame_of[u], frame_of[v]
        linked.add((min(fu, fv), max(fu, fv)))
    for t in range(last):
        tt = (t + 1) % n_frames
        if tt == t:
            continue
        key = (min(t, tt), max(t, tt))
        if key in linked:
            continue
        sims = mats[t] @ mats[tt].T
        i, j = np.unravel_index(int(np.argmax(sims)), sims.shape)
        _add(by_frame[t][int(i)].node_id, by_frame[tt][int(j)].node_id, float(sims[i, j]))
        linked.add(key)

    return [MapEdge(a=a, b=b, kind="inter", similarity=s) for (a, b), s in sorted(best.items())]


# ---------------------------------------------------------------------------
# Assembly and aggregation
# ---------------------------------------------------------------------------

def _make_nodes(fs: FrameSet) -> list[MapNode]:
    nodes: list[MapNode] = []
    for meta in fs.frames:
        for rec in fs.records_of(meta.frame_id):
            nodes.append(MapNode(
                node_id=len(nodes),
                frame_id=rec.frame_id,
                segment_id=rec.segment_id,
                centroid_x=rec.centroid_x,
                centroid_y=rec.centroid_y,
                area_px=rec.area_px,
                bbox=rec.bbox,
                descriptors=[rec.descriptor],
                semantic_vector=rec.semantic_vector,
                gt_instance=rec.gt_instance,
                gt_category=rec.gt_category,
            ))
    return nodes


def _build_adjacency(n: int, edges: Iterable[MapEdge]) -> list[list[int]]:
    adj: list[set[int]] = [set() for _ in range(n)]
    for e in edges:
        adj[e.a].add(e.b)
        adj[e.b].add(e.a)
    return [sorted(s) for s in adj]


def build_map(fs: FrameSet, cfg: GraphConfig | None = None) -> MapGraph:
    """Assemble the full map from a FrameSet and aggregate descriptors.

    Nodes are numbered in (frame, segment) order. The result is a single
    connected component whenever every frame has at least one record.
    """
    cfg = cfg or GraphConfig()
    if fs.n_frames == 0:
        raise IngestError("cannot build a map from an empty frame set")
    if fs.pano_wrap and not cfg.pano_wrap:
        cfg = replace(cfg, pano_wrap=True)
    nodes = _make_nodes(fs)
    by_frame: dict[int, list[MapNode]] = {}
    for n in nodes:
        by_frame.setdefault(n.frame_id, []).append(n)

    edges: list[MapEdge] = []
    intra_builder = (build_intra_edges_delaunay if cfg.intra_mode == "delaunay"
                     else build_intra_edges_complete)
    for t in range(fs.n_frames):
        edges.extend(intra_builder(by_frame.get(t, [])))
    if fs.n_frames > 1:
        edges.extend(build_inter_edges(nodes, fs.n_frames, cfg))
    elif not by_frame.get(0):
        raise IngestError("frame 0 has no segments; the map cannot be connected through it")

    g = MapGraph(
        nodes=nodes,
        edges=edges,
        adjacency=_build_adjacency(len(nodes), edges),
        config=cfg,
        frames=list(fs.frames),
    )
    return aggregate_descriptors(g, cfg.l_max, cfg.renormalize_layers)


def aggregate_descriptors(g: MapGraph, l_max: int | None = None,
                          renormalize: bool | None = None) -> MapGraph:
    """Recompute layers 1..l_max by neighborhood averaging of layer 0.

    Layer l+1 of node i is the mean of layer l over i and its neighbors
    (both edge kinds; planning's 0/1 weights play no role here). With
    renormalize on, each averaged vector is rescaled to unit norm.
    """
    if l_max is None:
        l_max = g.config.l_max
    if renormalize is None:
        renormalize = g.config.renormalize_layers
    if g.n_nodes == 0:
        return g
    h = g.descriptor_matrix(0)
    layers = [h]
    for _ in range(l_max):
        prev = layers[-1]
        nxt = np.empty_like(prev)
        for i in range(g.n_nodes):
            idx = [i] + g.adjacency[i]
            nxt[i] = prev[idx].mean(axis=0)
        if renormalize:
            norms = np.linalg.norm(nxt, axis=1, keepdims=True)
            nxt = nxt / np.where(norms == 0, 1.0, norms)
        layers.append(nxt)
    for i, node in enumerate(g.nodes):
        node.descriptors = [layer[i].copy() for layer in layers]
    return g


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def save_map(g: MapGraph, path: str | Path) -> None:
    """Write the map as a single "hopmap-graph/1" JSON document."""
    doc = {
        "format": FORMAT_GRAPH,
        "config": {
            "theta": g.config.theta,
            "window": list(g.config.window),
            "intra_mode": g.config.intra_mode,
            "l_max": g.config.l_max,
            "renormalize_layers": g.config.renormalize_layers,
            "pano_wrap": g.config.pano_wrap,
        },
        "frames": [
            {"frame_id": m.frame_id, "image_width": m.image_width,
             "image_height": m.image_height, "timestamp": m.timestamp}
            for m in g.frames
        ],
        "nodes": [
            {
                "node_id": n.node_id,
                "frame_id": n.frame_id,
                "segment_id": n.segment_id,
                "centroid_x": n.centroid_x,
                "centroid_y": n.centroid_y,
                "area_px": n.area_px,
                "bbox": list(n.bbox),
                "descriptors": [[float(x) for x in d] for d in n.descriptors],
                "semantic_vector": None if n.semantic_vector is None
                                   else [float(x) for x in n.semantic_vector],
                "gt_instance": n.gt_instance,
                "gt_category": n.gt_category,
            }
            for n in g.nodes
        ],
        "edges": [
            {"a": e.a, "b": e.b, "kind": e.kind, "similarity": e.similarity}
            for e in g.edges
        ],
    }
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def load_map(path: str | Path) -> MapGraph:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path.name}: malformed JSON ({exc.msg})") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_GRAPH:
        raise IngestError(f"{path.name}: expected format '{FORMAT_GRAPH}'")
    try:
        c = doc["config"]
        cfg = GraphConfig(
            theta=c["theta"], window=tuple(c["window"]), intra_mode=c["intra_mode"],
            l_max=c["l_max"], renormalize_layers=c["renormalize_layers"],
            pano_wrap=c["pano_wrap"],
        )
        frames = [FrameMeta(frame_id=f["frame_id"], image_width=f["image_width"],
                            image_height=f["image_height"], timestamp=f.get("timestamp"))
                  for f in doc.get("frames", [])]
        nodes = [
            MapNode(
                node_id=n["node_id"],
                frame_id=n["frame_id"],
                segment_id=n["segment_id"],
                centroid_x=n["centroid_x"],
                centroid_y=n["centroid_y"],
                area_px=n["area_px"],
                bbox=tuple(n["bbox"]),
                descriptors=[np.asarray(d, dtype=np.float64) for d in n["descriptors"]],
                semantic_vector=None if n.get("semantic_vector") is None
                                else np.asarray(n["semantic_vector"], dtype=np.float64),
                gt_instance=n.get("gt_instance"),
                gt_category=n.get("gt_category"),
            )
            for n in doc["nodes"]
        ]
        edges = [MapEdge(a=e["a"], b=e["b"], kind=e["kind"], similarity=e["similarity"])
                 for e in doc["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise IngestError(f"{path.name}: invalid map document ({exc})") from exc
    for i, n in enumerate(nodes):
        if n.node_id != i:
            raise IngestError(f"{path.name}: node ids must be contiguous from 0")
    for e in edges:
        if not (0 <= e.a < len(nodes) and 0 <= e.b < len(nodes)) or e.a == e.b:
            raise IngestError(f"{path.name}: edge ({e.a}, {e.b}) references invalid nodes")
    return MapGraph(nodes=nodes, edges=edges,
                    adjacency=_build_adjacency(len(nodes), edges),
                    config=cfg, frames=frames)


def export_dot(g: MapGraph, plan_nodes: Sequence[int] | None = None) -> str:
    """Render the map as Graphviz DOT; plan nodes (if given) are highlighted."""
    on_plan = set(plan_nodes or [])
    lines = ["graph hopmap {", "  node [shape=circle];"]
    for n in g.nodes:
        attrs = [f'label="f{n.frame_id}s{n.segment_id}"']
        if n.node_id in on_plan:
            attrs.append("style=filled")
            attrs.append('fillcolor="/set19/1"')
        lines.append(f"  n{n.node_id} [{', '.join(attrs)}];")
    for e in g.edges:
        if e.kind == "intra":
            lines.append(f"  n{e.a} -- n{e.b};")
        else:
            lines.append(f'  n{e.a} -- n{e.b} [style=dashed, label="{e.similarity:.3f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def connected_component_count(g: MapGraph) -> int:
    """Number of connected components (simple union-find)."""
    parent = list(range(g.n_nodes))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in g.edges:
        ra, rb = find(e.a), find(e.b)
        if ra != rb:
            parent[ra] = rb
    return len({find(i) for i in range(g.n_nodes)})
