"""Class-agnostic region extraction.

The built-in "quantize-cc" segmenter smooths the image, quantizes each
color channel into a small number of levels and takes 4-connected
components of the resulting color codes. It is deliberately simple: the
goal is stable, repeatable regions for the mapping engine, not
state-of-the-art masks.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import ExtractError


def segment_image(
    img: np.ndarray,
    quant_levels: int = 4,
    min_area: int = 40,
    max_segments: int = 24,
    smooth_sigma: float = 1.5,
) -> list[np.ndarray]:
    """Split an (H, W, 3) image into disjoint boolean masks.

    Masks are ordered by decreasing area (ties broken by raster position
    of their first pixel) and truncated to `max_segments`. Components
    smaller than `min_area` pixels are dropped, except that the single
    largest component is always kept so no image comes back empty.
    """
    if quant_levels < 2:
        raise ExtractError(f"quant_levels must be >= 2, got {quant_levels}")
    if min_area < 1:
        raise ExtractError(f"min_area must be >= 1, got {min_area}")
    if max_segments < 1:
        raise ExtractError(f"max_segments must be >= 1, got {max_segments}")
    if smooth_sigma < 0:
        raise ExtractError(f"smooth_sigma must be >= 0, got {smooth_sigma}")

    smoothed = img
    if smooth_sigma > 0:
        smoothed = ndimage.gaussian_filter(img, (smooth_sigma, smooth_sigma, 0.0))
    levels = np.minimum((smoothed * quant_levels).astype(np.int64), quant_levels - 1)
    code = (levels[..., 0] * quant_levels + levels[..., 1]) * quant_levels + levels[..., 2]

    kept: list[tuple[int, int, int, np.ndarray]] = []
    # Largest component overall, tracked without materializing its mask so
    # speck-heavy images stay cheap; only used as the empty-result fallback.
    best: tuple[int, int, int] | None = None
    for value in np.unique(code):
        labels, n_comp = ndimage.label(code == value)
        if n_comp == 0:
            continue
        counts = np.bincount(labels.ravel())
        for comp in range(1, n_comp + 1):
            area = int(counts[comp])
            if best is None or area > best[0]:
                best = (area, int(value), comp)
            if area >= min_area:
                mask = labels == comp
                first_y, first_x = (int(v) for v in np.argwhere(mask)[0])
                kept.append((area, first_y, first_x, mask))
    if not kept:
        assert best is not None
        labels, _ = ndimage.label(code == best[1])
        mask = labels == best[2]
        first_y, first_x = (int(v) for v in np.argwhere(mask)[0])
        kept = [(best[0], first_y, first_x, mask)]
    kept.sort(key=lambda e: (-e[0], e[1], e[2]))
    return [mask for _, _, _, mask in kept[:max_segments]]
