"""Image discovery and decoding.

Every image is decoded to a float64 RGB array in [0, 1] regardless of the
on-disk mode, so the rest of the pipeline sees one canonical layout.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ExtractError

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".ppm", ".pgm",
                  ".tif", ".tiff", ".webp"}


def list_images(directory: str | Path) -> list[Path]:
    """All image files in `directory`, sorted by name (this fixes frame order)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ExtractError(f"image directory not found: {directory}")
    paths = sorted(p for p in directory.iterdir()
                   if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise ExtractError(f"no images with suffix {sorted(IMAGE_SUFFIXES)} in {directory}")
    return paths


def load_image(path: str | Path) -> np.ndarray:
    """Decode one image to (H, W, 3) float64 in [0, 1].

    Raises OSError/ValueError for undecodable files; callers turn that into
    a per-file error report.
    """
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    if arr.ndim != 3 or arr.shape[0] < 2 or arr.shape[1] < 2:
        raise ValueError(f"{path}: image too small ({arr.shape})")
    return arr
