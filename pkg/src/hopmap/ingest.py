"""Per-frame segment records: parsing, validation and pre-filters.

File format ("hopmap-ingest/1"): UTF-8 text, one JSON object per line.
The first line is a header object carrying the frame list, descriptor
dimension and format version; every following line is one segment record.
See MANUAL.md for the exact field names.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import IngestError

FORMAT_INGEST = "hopmap-ingest/1"
FORMAT_VECTORS = "hopmap-vectors/1"

# Descriptors are accepted if their l2 norm is within this distance of 1
# and rewritten to exact unit norm unless they already are (within float eps).
NORM_TOLERANCE = 1e-3
NORM_EXACT = 1e-12


@dataclass(frozen=True, eq=False)
class SegmentRecord:
    """One observed image segment: geometry stats plus descriptors."""

    frame_id: int
    segment_id: int
    centroid_x: float
    centroid_y: float
    area_px: float
    bbox: tuple[float, float, float, float]
    descriptor: np.ndarray
    semantic_vector: np.ndarray | None = None
    gt_instance: int | None = None
    gt_category: int | None = None


@dataclass(frozen=True)
class FrameMeta:
    frame_id: int
    image_width: int
    image_height: int
    timestamp: float | None = None


@dataclass
class FrameSet:
    """An ordered frame sequence with its segment records grouped by frame."""

    frames: list[FrameMeta]
    records_by_frame: dict[int, list[SegmentRecord]]
    pano_wrap: bool = False

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def n_records(self) -> int:
        return sum(len(v) for v in self.records_by_frame.values())

    def frame_meta(self, frame_id: int) -> FrameMeta:
        return self.frames[frame_id]

    def records_of(self, frame_id: int) -> list[SegmentRecord]:
        return self.records_by_frame.get(frame_id, [])

    def all_records(self) -> Iterator[SegmentRecord]:
        for meta in self.frames:
            yield from self.records_by_frame.get(meta.frame_id, [])

    @property
    def descriptor_dim(self) -> int | None:
        for rec in self.all_records():
            return int(rec.descriptor.shape[0])
        return None


def _unit(vec: np.ndarray, what: str) -> np.ndarray:
    """Validate near-unit norm and return an exactly unit-norm copy."""
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise IngestError(f"{what} has norm {norm:.6f}, expected 1 +/- {NORM_TOLERANCE}")
    if abs(norm - 1.0) <= NORM_EXACT:
        return vec
    return vec / norm


def make_record(
    frame_id: int,
    segment_id: int,
    centroid_x: float,
    centroid_y: float,
    area_px: float,
    bbox: Sequence[float],
    descriptor: Sequence[float],
    semantic_vector: Sequence[float] | None = None,
    gt_instance: int | None = None,
    gt_category: int | None = None,
) -> SegmentRecord:
    """Build a validated SegmentRecord (descriptors re-normalized to unit)."""
    name = f"record (frame {frame_id}, segment {segment_id})"
    desc = _unit(np.asarray(descriptor, dtype=np.float64), f"descriptor of {name}")
    sem = None
    if semantic_vector is not None:
        sem = _unit(np.asarray(semantic_vector, dtype=np.float64), f"semantic_vector of {name}")
    if area_px <= 0:
        raise IngestError(f"{name}: area_px must be > 0, got {area_px}")
    if len(bbox) != 4:
        raise IngestError(f"{name}: bbox must have 4 coordinates")
    return SegmentRecord(
        frame_id=int(frame_id),
        segment_id=int(segment_id),
        centroid_x=float(centroid_x),
        centroid_y=float(centroid_y),
        area_px=float(area_px),
        bbox=tuple(float(b) for b in bbox),
        descriptor=desc,
        semantic_vector=sem,
        gt_instance=None if gt_instance is None else int(gt_instance),
        gt_category=None if gt_category is None else int(gt_category),
    )


def build_frameset(
    frames: Sequence[FrameMeta],
    records: Sequence[SegmentRecord],
    pano_wrap: bool = False,
) -> FrameSet:
    """Group records by frame and enforce the FrameSet invariants."""
    metas = sorted(frames, key=lambda m: m.frame_id)
    for i, meta in enumerate(metas):
        if meta.frame_id != i:
            raise IngestError(f"frame ids must be contiguous from 0; got {meta.frame_id} at position {i}")
        if meta.image_width <= 0 or meta.image_height <= 0:
            raise IngestError(f"frame {meta.frame_id}: image dimensions must be positive")
    by_id = {m.frame_id: m for m in metas}
    grouped: dict[int, list[SegmentRecord]] = {m.frame_id: [] for m in metas}
    seen: set[tuple[int, int]] = set()
    dim: int | None = None
    for rec in records:
        if rec.frame_id not in by_id:
            raise IngestError(f"record references unknown frame {rec.frame_id}")
        key = (rec.frame_id, rec.segment_id)
        if key in seen:
            raise IngestError(f"duplicate (frame_id, segment_id) = {key}")
        seen.add(key)
        meta = by_id[rec.frame_id]
        if not (0.0 <= rec.centroid_x <= meta.image_width and 0.0 <= rec.centroid_y <= meta.image_height):
            raise IngestError(
                f"record (frame {rec.frame_id}, segment {rec.segment_id}): "
                f"centroid ({rec.centroid_x}, {rec.centroid_y}) outside image bounds"
            )
        if dim is None:
            dim = rec.descriptor.shape[0]
        elif rec.descriptor.shape[0] != dim:
            raise IngestError(
                f"record (frame {rec.frame_id}, segment {rec.segment_id}): "
                f"descriptor dim {rec.descriptor.shape[0]} != {dim}"
            )
        grouped[rec.frame_id].append(rec)
    for fid in grouped:
        grouped[fid].sort(key=lambda r: r.segment_id)
    return FrameSet(frames=metas, records_by_frame=grouped, pano_wrap=bool(pano_wrap))


def _record_from_json(obj: dict, lineno: int) -> SegmentRecord:
    try:
        return make_record(
            frame_id=obj["frame_id"],
            segment_id=obj["segment_id"],
            centroid_x=obj["centroid_x"],
            centroid_y=obj["centroid_y"],
            area_px=obj["area_px"],
            bbox=obj["bbox"],
            descriptor=obj["descriptor"],
            semantic_vector=obj.get("semantic_vector"),
            gt_instance=obj.get("gt_instance"),
            gt_category=obj.get("gt_category"),
        )
    except KeyError as exc:
        raise IngestError(f"line {lineno}: missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise IngestError(f"line {lineno}: {exc}") from exc
    except IngestError as exc:
        raise IngestError(f"line {lineno}: {exc}") from exc


def parse_frame_records(path: str | Path) -> FrameSet:
    """Parse a "hopmap-ingest/1" file into a validated FrameSet.

    An empty file yields an empty FrameSet. Any malformed line raises
    IngestError naming the line number.
    """
    path = Path(path)
    header = None
    records: list[SegmentRecord] = []
    try:
        fh = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc.strerror or exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"{path.name}, line {lineno}: malformed JSON ({exc.msg})") from exc
            if header is None:
                if not isinstance(obj, dict) or obj.get("format") != FORMAT_INGEST:
                    raise IngestError(
                        f"{path.name}, line {lineno}: expected header with format '{FORMAT_INGEST}'"
                    )
                header = obj
                continue
            try:
                records.append(_record_from_json(obj, lineno))
            except IngestError as exc:
                raise IngestError(f"{path.name}, {exc}") from exc
    if header is None:
        return FrameSet(frames=[], records_by_frame={}, pano_wrap=False)
    try:
        frames = [
            FrameMeta(
                frame_id=int(f["frame_id"]),
                image_width=int(f["image_width"]),
                image_height=int(f["image_height"]),
                timestamp=f.get("timestamp"),
            )
            for f in header["frames"]
        ]
    except (KeyError, TypeError) as exc:
        raise IngestError(f"{path.name}: invalid header frame list ({exc})") from exc
    fs = build_frameset(frames, records, pano_wrap=bool(header.get("pano_wrap", False)))
    dim = header.get("descriptor_dim")
    if dim is not None and fs.descriptor_dim is not None and fs.descriptor_dim != int(dim):
        raise IngestError(f"{path.name}: header descriptor_dim {dim} != record dim {fs.descriptor_dim}")
    return fs


def _floats(arr: np.ndarray) -> list[float]:
    return [float(x) for x in arr]


def write_frame_records(fs: FrameSet, path: str | Path) -> None:
    """Serialize a FrameSet to "hopmap-ingest/1" (inverse of parse)."""
    path = Path(path)
    header = {
        "format": FORMAT_INGEST,
        "descriptor_dim": fs.descriptor_dim,
        "pano_wrap": fs.pano_wrap,
        "frames": [
            {
                "frame_id": m.frame_id,
                "image_width": m.image_width,
                "image_height": m.image_height,
                "timestamp": m.timestamp,
            }
            for m in fs.frames
        ],
    }
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for rec in fs.all_records():
            obj: dict = {
                "frame_id": rec.frame_id,
                "segment_id": rec.segment_id,
                "centroid_x": rec.centroid_x,
                "centroid_y": rec.centroid_y,
                "area_px": rec.area_px,
                "bbox": list(rec.bbox),
                "descriptor": _floats(rec.descriptor),
            }
            if rec.semantic_vector is not None:
                obj["semantic_vector"] = _floats(rec.semantic_vector)
            if rec.gt_instance is not None:
                obj["gt_instance"] = rec.gt_instance
            if rec.gt_category is not None:
                obj["gt_category"] = rec.gt_category
            fh.write(json.dumps(obj) + "\n")


def read_vectors(path: str | Path) -> dict[str, np.ndarray]:
    """Read a named-vector file ("hopmap-vectors/1"), e.g. text embeddings.

    The file is one JSON object: {"format": ..., "vectors": {name: [floats]}}.
    Every vector is validated to near-unit norm and renormalized.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path.name}: malformed JSON ({exc.msg})") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_VECTORS:
        raise IngestError(f"{path.name}: expected format '{FORMAT_VECTORS}'")
    vectors = doc.get("vectors")
    if not isinstance(vectors, dict) or not vectors:
        raise IngestError(f"{path.name}: 'vectors' must be a non-empty object")
    out = {}
    for name, values in vectors.items():
        try:
            vec = np.asarray(values, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise IngestError(f"{path.name}: vector {name!r}: {exc}") from exc
        if vec.ndim != 1 or vec.size == 0:
            raise IngestError(f"{path.name}: vector {name!r} must be a flat non-empty list")
        out[name] = _unit(vec, f"vector {name!r} in {path.name}")
    return out


def write_vectors(vectors: dict[str, np.ndarray], path: str | Path) -> None:
    doc = {"format": FORMAT_VECTORS,
           "vectors": {name: [float(x) for x in vec] for name, vec in vectors.items()}}
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def filter_stuff(fs: FrameSet, stuff_vectors: Sequence[np.ndarray], tau_stuff: float = 0.9) -> FrameSet:
    """Drop records whose semantic vector is too close to any 'stuff' vector.

    Records without a semantic vector always pass. Frames are never removed.
    """
    if not len(stuff_vectors):
        return FrameSet(fs.frames, {k: list(v) for k, v in fs.records_by_frame.items()}, fs.pano_wrap)
    stuff = np.stack([np.asarray(v, dtype=np.float64) for v in stuff_vectors])
    kept: dict[int, list[SegmentRecord]] = {}
    for meta in fs.frames:
        out = []
        for rec in fs.records_of(meta.frame_id):
            if rec.semantic_vector is not None:
                if float(np.max(stuff @ rec.semantic_vector)) > tau_stuff:
                    continue
            out.append(rec)
        kept[meta.frame_id] = out
    return FrameSet(frames=list(fs.frames), records_by_frame=kept, pano_wrap=fs.pano_wrap)


def filter_small(fs: FrameSet, min_area_frac: float = 0.002) -> FrameSet:
    """Drop records smaller than `min_area_frac` of their frame's image area."""
    kept: dict[int, list[SegmentRecord]] = {}
    for meta in fs.frames:
        image_area = meta.image_width * meta.image_height
        kept[meta.frame_id] = [
            rec for rec in fs.records_of(meta.frame_id)
            if rec.area_px / image_area >= min_area_frac
        ]
    return FrameSet(frames=list(fs.frames), records_by_frame=kept, pano_wrap=fs.pano_wrap)


def records_equal(a: SegmentRecord, b: SegmentRecord) -> bool:
    def _opt_vec_eq(x, y):
        if (x is None) != (y is None):
            return False
        return x is None or np.array_equal(x, y)

    return (
        a.frame_id == b.frame_id
        and a.segment_id == b.segment_id
        and a.centroid_x == b.centroid_x
        and a.centroid_y == b.centroid_y
        and a.area_px == b.area_px
        and a.bbox == b.bbox
        and np.array_equal(a.descriptor, b.descriptor)
        and _opt_vec_eq(a.semantic_vector, b.semantic_vector)
        and a.gt_instance == b.gt_instance
        and a.gt_category == b.gt_category
    )


def framesets_equal(a: FrameSet, b: FrameSet) -> bool:
    if a.frames != b.frames or a.pano_wrap != b.pano_wrap:
        return False
    if a.n_records != b.n_records:
        return False
    return all(records_equal(x, y) for x, y in zip(a.all_records(), b.all_records()))
