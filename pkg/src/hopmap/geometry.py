"""Planar triangulation helpers for intra-frame edge construction.

scipy's Qhull wrapper has two failure modes we must survive: exactly
collinear input raises, and coincident points are silently merged (the
merged point then never appears in any simplex). Both are handled here so
callers always get an edge set covering every input point.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay, QhullError

# Perturbation step applied to coincident points, in pixels. Small enough
# to never change which segments overlap, large enough for Qhull.
DUP_EPSILON = 1e-6


def _collinear(points: np.ndarray, tol: float = 1e-9) -> bool:
    """True if all points lie on one line (or there are fewer than 3)."""
    if len(points) < 3:
        return True
    p0 = points[0]
    d = points - p0
    # Any pair of difference vectors with a nonzero cross product breaks
    # collinearity; compare against the first nonzero direction found.
    base = None
    for v in d[1:]:
        if np.hypot(v[0], v[1]) > tol:
            base = v
            break
    if base is None:
        return True
    cross = d[:, 0] * base[1] - d[:, 1] * base[0]
    scale = max(1.0, float(np.max(np.abs(points))))
    return bool(np.all(np.abs(cross) <= tol * scale))


def _path_edges(points: np.ndarray) -> list[tuple[int, int]]:
    """Chain the points in coordinate order (fallback for degenerate input)."""
    order = np.lexsort((points[:, 1], points[:, 0]))
    out = []
    for k in range(len(order) - 1):
        u, v = int(order[k]), int(order[k + 1])
        out.append((u, v) if u < v else (v, u))
    return sorted(out)


def _dedupe(points: np.ndarray) -> np.ndarray:
    """Perturb coincident points deterministically so none get merged."""
    out = points.astype(np.float64).copy()
    seen: dict[tuple[float, float], int] = {}
    for i in range(len(out)):
        key = (float(out[i, 0]), float(out[i, 1]))
        while key in seen:
            out[i, 0] += DUP_EPSILON * (i + 1)
            key = (float(out[i, 0]), float(out[i, 1]))
        seen[key] = i
    return out


def triangulate(points: np.ndarray) -> tuple[list[tuple[int, int]], list[tuple[int, int, int]]]:
    """Triangulate 2-d points, returning (edges, triangles) over input indices.

    Edges are unique (i < j) pairs. Degenerate inputs (fewer than 3 points,
    collinear sets, Qhull failures) fall back to a path graph with no
    triangles; this function never raises on finite input.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"expected (n, 2) points, got shape {pts.shape}")
    n = len(pts)
    if n == 0:
        return [], []
    if n == 1:
        return [], []
    if n == 2:
        return [(0, 1)], []
    work = _dedupe(pts)
    if _collinear(work):
        return _path_edges(work), []
    try:
        tri = Delaunay(work)
    except (QhullError, ValueError):
        return _path_edges(work), []
    edges: set[tuple[int, int]] = set()
    triangles: list[tuple[int, int, int]] = []
    for simplex in tri.simplices:
        a, b, c = (int(x) for x in simplex)
        triangles.append(tuple(sorted((a, b, c))))
        for u, v in ((a, b), (b, c), (a, c)):
            edges.add((u, v) if u < v else (v, u))
    covered = {i for e in edges for i in e}
    if len(covered) < n:
        # Qhull merged points despite perturbation; chain instead.
        return _path_edges(work), []
    return sorted(edges), sorted(triangles)


def circumcircle(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, float]:
    """Circumcenter and radius of the triangle abc. Raises on degenerate."""
    ax, ay = a
    bx, by = b
    cx, cy = c
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        raise ValueError("degenerate triangle")
    ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay) + (cx**2 + cy**2) * (ay - by)) / d
    uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx) + (cx**2 + cy**2) * (bx - ax)) / d
    center = np.array([ux, uy])
    return center, float(np.hypot(ax - ux, ay - uy))
