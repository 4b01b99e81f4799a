"""Batch extraction: image directory in, ingest file out.

The output is written with the mapping engine's own serializers, so it
conforms to "hopmap-ingest/1" by construction and is re-validated by the
same code that will later parse it. A companion "hopmap-vectors/1" file
carries the text embeddings for the job's stuff labels, ready for the
engine's background filter.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hopmap import FrameMeta, build_frameset, make_record, write_frame_records, write_vectors

from . import features as feat
from .errors import ExtractError
from .images import list_images, load_image
from .segment import segment_image

SEGMENTERS = ("quantize-cc",)
EMBEDDERS = ("filter-bank",)


@dataclass(frozen=True)
class ExtractionJob:
    """One batch run over an image directory.

    `segmenter` and `embedder` name the models to run; only the built-in
    classical backends are bundled. `device` is a hint and is ignored by
    them (they are CPU-only). Frames are ordered by sorted file name.
    """

    image_dir: str | Path
    output_path: str | Path
    segmenter: str = "quantize-cc"
    embedder: str = "filter-bank"
    device: str = "cpu"
    stuff_labels: tuple[str, ...] = ("floor", "ceiling", "wall")
    stuff_output_path: str | Path | None = None
    feature_layer: int = 2
    feature_stride: int = 4
    quant_levels: int = 4
    min_area: int = 40
    max_segments: int = 24
    smooth_sigma: float = 1.5
    semantic_dim: int = 16
    pano_wrap: bool = False
    workers: int = 1


@dataclass(frozen=True)
class FileReport:
    """One image that could not be processed; the batch continues without it."""

    path: str
    error: str


@dataclass
class ExtractionResult:
    output_path: Path
    stuff_path: Path | None
    n_frames: int
    n_segments: int
    descriptor_dim: int
    errors: list[FileReport] = field(default_factory=list)


def _validate_job(job: ExtractionJob) -> None:
    if job.segmenter not in SEGMENTERS:
        raise ExtractError(f"unknown segmenter model {job.segmenter!r} "
                           f"(available: {', '.join(SEGMENTERS)})")
    if job.embedder not in EMBEDDERS:
        raise ExtractError(f"unknown embedder model {job.embedder!r} "
                           f"(available: {', '.join(EMBEDDERS)})")
    if job.feature_layer < 0:
        raise ExtractError(f"feature_layer must be >= 0, got {job.feature_layer}")
    if job.feature_stride < 1:
        raise ExtractError(f"feature_stride must be >= 1, got {job.feature_stride}")
    if job.semantic_dim < 2:
        raise ExtractError(f"semantic_dim must be >= 2, got {job.semantic_dim}")
    if job.workers < 1:
        raise ExtractError(f"workers must be >= 1, got {job.workers}")
    for label in job.stuff_labels:
        if not label.strip():
            raise ExtractError("stuff labels must be non-empty strings")


def default_stuff_path(output_path: str | Path) -> Path:
    out = Path(output_path)
    return out.parent / (out.stem + ".stuff.json")


@dataclass(frozen=True)
class _Segment:
    centroid_x: float
    centroid_y: float
    area_px: float
    bbox: tuple[float, float, float, float]
    descriptor: np.ndarray
    semantic: np.ndarray


def _process_image(path: Path, job: ExtractionJob,
                   embeddings: dict[str, np.ndarray]) -> tuple[int, int, list[_Segment]]:
    img = load_image(path)
    h_img, w_img = img.shape[:2]
    masks = segment_image(img, quant_levels=job.quant_levels, min_area=job.min_area,
                          max_segments=job.max_segments, smooth_sigma=job.smooth_sigma)
    fmap = feat.dense_feature_map(img, layer=job.feature_layer, stride=job.feature_stride)
    fmap_up = feat.upsample_features(fmap, h_img, w_img)
    gmag = feat.gradient_magnitude(img)
    segments = []
    for mask in masks:
        ys, xs = np.nonzero(mask)
        segments.append(_Segment(
            centroid_x=float(xs.mean()) + 0.5,
            centroid_y=float(ys.mean()) + 0.5,
            area_px=float(mask.sum()),
            bbox=(float(xs.min()), float(ys.min()),
                  float(xs.max()) + 1.0, float(ys.max()) + 1.0),
            descriptor=feat.pooled_descriptor(fmap_up, mask),
            semantic=feat.semantic_vector(mask, float(gmag[mask].mean()), embeddings),
        ))
    return w_img, h_img, segments


def extract(job: ExtractionJob) -> ExtractionResult:
    """Run the batch and write the ingest (and stuff vectors) files.

    Unreadable or undecodable images are reported in `result.errors` and
    skipped; the remaining frames are renumbered contiguously. The job
    fails outright only when no image can be processed at all.
    """
    _validate_job(job)
    paths = list_images(job.image_dir)
    embeddings = feat.cue_embeddings(job.semantic_dim)
    for label in job.stuff_labels:
        embeddings.setdefault(label, feat.embed_text(label, job.semantic_dim))

    def one(path: Path):
        try:
            return path, _process_image(path, job, embeddings), None
        except Exception as exc:  # per-file report, batch continues
            return path, None, f"{type(exc).__name__}: {exc}"

    if job.workers > 1:
        with ThreadPoolExecutor(max_workers=job.workers) as pool:
            outcomes = list(pool.map(one, paths))
    else:
        outcomes = [one(p) for p in paths]

    errors = [FileReport(path=str(p), error=msg) for p, _, msg in outcomes if msg]
    good = [(p, payload) for p, payload, msg in outcomes if msg is None]
    if not good:
        detail = f"; first error: {errors[0].path}: {errors[0].error}" if errors else ""
        raise ExtractError(f"no image in {job.image_dir} could be processed{detail}")

    metas = []
    records = []
    for frame_id, (_, (w_img, h_img, segments)) in enumerate(good):
        metas.append(FrameMeta(frame_id=frame_id, image_width=w_img, image_height=h_img))
        for seg_id, seg in enumerate(segments):
            records.append(make_record(
                frame_id=frame_id, segment_id=seg_id,
                centroid_x=seg.centroid_x, centroid_y=seg.centroid_y,
                area_px=seg.area_px, bbox=seg.bbox,
                descriptor=seg.descriptor, semantic_vector=seg.semantic))
    fs = build_frameset(metas, records, pano_wrap=job.pano_wrap)

    out = Path(job.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_frame_records(fs, out)

    stuff_path: Path | None = None
    if job.stuff_labels:
        stuff_path = (Path(job.stuff_output_path) if job.stuff_output_path
                      else default_stuff_path(out))
        stuff_path.parent.mkdir(parents=True, exist_ok=True)
        write_vectors({label: embeddings[label] for label in job.stuff_labels}, stuff_path)

    dim = fs.descriptor_dim
    return ExtractionResult(
        output_path=out, stuff_path=stuff_path, n_frames=fs.n_frames,
        n_segments=fs.n_records, descriptor_dim=0 if dim is None else dim,
        errors=errors)
