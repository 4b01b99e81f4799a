"""Command-line entry point for batch extraction.

Configuration comes from one structured JSON file (--config) whose keys
mirror ExtractionJob fields; explicit flags override it. The resolved
parameters are echoed next to the output as a "hopmap-config/1" file so
a run can be reproduced from its artifacts.

Exit codes: 0 success (including partial output with per-file errors),
2 input or configuration failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from hopmap import IngestError

from .errors import ExtractError
from .extract import ExtractionJob, extract

FORMAT_CONFIG = "hopmap-config/1"

_JOB_KEYS = ("image_dir", "output_path", "segmenter", "embedder", "device",
             "stuff_labels", "stuff_output_path", "feature_layer",
             "feature_stride", "quant_levels", "min_area", "max_segments",
             "smooth_sigma", "semantic_dim", "pano_wrap", "workers")


def _load_config(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ExtractError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ExtractError(f"{path}: malformed JSON ({exc.msg})") from exc
    if not isinstance(doc, dict):
        raise ExtractError(f"{path}: config must be a JSON object")
    # Accept either a bare parameter object or a config echo from an
    # earlier run ({"format": "hopmap-config/1", "params": {...}}).
    params = doc
    if "params" in doc:
        if doc.get("format") not in (None, FORMAT_CONFIG):
            raise ExtractError(f"{path}: expected format '{FORMAT_CONFIG}'")
        params = doc["params"]
        if not isinstance(params, dict):
            raise ExtractError(f"{path}: 'params' must be a JSON object")
    unknown = sorted(set(params) - set(_JOB_KEYS))
    if unknown:
        raise ExtractError(f"{path}: unknown config keys: {', '.join(unknown)}")
    return dict(params)


def _resolve(args: argparse.Namespace) -> ExtractionJob:
    params = _load_config(args.config) if args.config else {}
    overrides = {
        "image_dir": args.images,
        "output_path": args.out,
        "segmenter": args.segmenter,
        "embedder": args.embedder,
        "device": args.device,
        "stuff_labels": None if args.stuff_labels is None
        else tuple(s.strip() for s in args.stuff_labels.split(",") if s.strip()),
        "stuff_output_path": args.stuff_out,
        "feature_layer": args.feature_layer,
        "feature_stride": args.feature_stride,
        "quant_levels": args.quant_levels,
        "min_area": args.min_area,
        "max_segments": args.max_segments,
        "smooth_sigma": args.smooth_sigma,
        "semantic_dim": args.semantic_dim,
        "pano_wrap": args.pano_wrap,
        "workers": args.workers,
    }
    for key, value in overrides.items():
        if value is not None:
            params[key] = value
    if "stuff_labels" in params:
        params["stuff_labels"] = tuple(params["stuff_labels"])
    if "image_dir" not in params:
        raise ExtractError("need --images (or image_dir in the config file)")
    if "output_path" not in params:
        raise ExtractError("need --out (or output_path in the config file)")
    try:
        return ExtractionJob(**params)
    except TypeError as exc:
        raise ExtractError(f"invalid configuration: {exc}") from exc


def _echo_config(job: ExtractionJob) -> Path:
    out = Path(job.output_path)
    doc = {
        "format": FORMAT_CONFIG,
        "command": "extract",
        "params": {
            "image_dir": str(job.image_dir),
            "output_path": str(job.output_path),
            "segmenter": job.segmenter,
            "embedder": job.embedder,
            "device": job.device,
            "stuff_labels": list(job.stuff_labels),
            "stuff_output_path": None if job.stuff_output_path is None
            else str(job.stuff_output_path),
            "feature_layer": job.feature_layer,
            "feature_stride": job.feature_stride,
            "quant_levels": job.quant_levels,
            "min_area": job.min_area,
            "max_segments": job.max_segments,
            "smooth_sigma": job.smooth_sigma,
            "semantic_dim": job.semantic_dim,
            "pano_wrap": job.pano_wrap,
            "workers": job.workers,
        },
    }
    path = out.parent / (out.stem + ".config.json")
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hopmap-extract",
        description="Extract segment records from an image directory into an "
                    "ingest file for the hopmap engine.")
    ap.add_argument("--config", help="structured JSON config file")
    ap.add_argument("--images", help="image directory")
    ap.add_argument("--out", help="output ingest file")
    ap.add_argument("--stuff-out", help="output vectors file for stuff embeddings")
    ap.add_argument("--stuff-labels",
                    help="comma-separated background labels (default floor,ceiling,wall)")
    ap.add_argument("--segmenter")
    ap.add_argument("--embedder")
    ap.add_argument("--device")
    ap.add_argument("--feature-layer", type=int)
    ap.add_argument("--feature-stride", type=int)
    ap.add_argument("--quant-levels", type=int)
    ap.add_argument("--min-area", type=int)
    ap.add_argument("--max-segments", type=int)
    ap.add_argument("--smooth-sigma", type=float)
    ap.add_argument("--semantic-dim", type=int)
    ap.add_argument("--pano-wrap", action=argparse.BooleanOptionalAction)
    ap.add_argument("--workers", type=int)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = _resolve(args)
        result = extract(job)
    except (ExtractError, IngestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for report in result.errors:
        print(f"error: {report.path}: {report.error}", file=sys.stderr)
    echo = _echo_config(job)
    print(f"wrote {result.output_path} ({result.n_frames} frames, "
          f"{result.n_segments} records, descriptor dim {result.descriptor_dim})")
    if result.stuff_path is not None:
        print(f"wrote {result.stuff_path} ({len(job.stuff_labels)} stuff vectors)")
    print(f"wrote {echo}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
