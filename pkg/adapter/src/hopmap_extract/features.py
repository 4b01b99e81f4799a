"""Dense features, descriptor pooling and the text-embedding stand-in.

The built-in "filter-bank" embedder computes a dense feature map on a
strided grid (bias, color, then one smoothing octave plus its gradients
per extra layer), bilinearly upsamples it back to image resolution and
mean-pools it inside each mask. Pooled descriptors are l2-normalized;
the constant bias channel keeps the pooled mean away from the zero
vector, so normalization is always well defined.

Text embeddings are deterministic hash-seeded unit vectors. A segment's
semantic vector is a cue-weighted mix of the embeddings for "floor",
"ceiling", "wall" and "object", with weights taken from where the mask
sits vertically and how textured it is. That keeps background filtering
honest: a smooth region at the bottom of the image really does land
near the "floor" embedding.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np
from scipy import ndimage

from .errors import ExtractError

LUMA = np.array([0.299, 0.587, 0.114])
SEMANTIC_DIM_DEFAULT = 16
CUE_LABELS = ("floor", "ceiling", "wall", "object")


def feature_dim(layer: int) -> int:
    """Channels in the dense map: bias + RGB, plus 6 per smoothing octave."""
    return 4 + 6 * layer


def resample_bilinear(channel: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinearly resample one 2-d channel to an exact output shape."""
    ys = np.linspace(0.0, channel.shape[0] - 1.0, out_h)
    xs = np.linspace(0.0, channel.shape[1] - 1.0, out_w)
    grid = np.stack(np.meshgrid(ys, xs, indexing="ij"))
    return ndimage.map_coordinates(channel, grid, order=1, mode="nearest")


def dense_feature_map(img: np.ndarray, layer: int = 2, stride: int = 4) -> np.ndarray:
    """Per-pixel features on a grid `stride` times coarser than the image.

    Layer 0 is bias + RGB only; each additional layer appends one
    smoothing octave (3 smoothed color channels) and the luminance
    gradients at that scale (dx, dy, magnitude).
    """
    if layer < 0:
        raise ExtractError(f"feature layer must be >= 0, got {layer}")
    if stride < 1:
        raise ExtractError(f"feature stride must be >= 1, got {stride}")
    h_img, w_img = img.shape[:2]
    out_h = max(2, round(h_img / stride))
    out_w = max(2, round(w_img / stride))
    base = img
    if stride > 1:
        base = ndimage.gaussian_filter(img, (stride / 2.0, stride / 2.0, 0.0))
    small = np.stack([resample_bilinear(base[..., c], out_h, out_w) for c in range(3)],
                     axis=-1)
    gray = small @ LUMA
    channels = [np.ones_like(gray)]
    channels += [small[..., c] for c in range(3)]
    sigma = 1.0
    for _ in range(layer):
        smooth = ndimage.gaussian_filter(small, (sigma, sigma, 0.0))
        g = ndimage.gaussian_filter(gray, sigma)
        gy, gx = np.gradient(g)
        channels += [smooth[..., c] for c in range(3)]
        channels += [gx, gy, np.hypot(gx, gy)]
        sigma *= 2.0
    return np.stack(channels, axis=-1)


def upsample_features(feat: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Upsample an (h, w, C) feature map to image resolution before masking."""
    return np.stack(
        [resample_bilinear(feat[..., c], out_h, out_w) for c in range(feat.shape[-1])],
        axis=-1)


def pooled_descriptor(feat_up: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Masked mean of the upsampled feature map, l2-normalized."""
    vec = feat_up[mask].mean(axis=0)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ExtractError("pooled descriptor collapsed to zero")
    return vec / norm


def _text_seed(text: str) -> list[int]:
    normalized = " ".join(text.strip().lower().split())
    digest = hashlib.sha256(normalized.encode("utf-8")).digest()
    return [int.from_bytes(digest[i:i + 8], "big") for i in range(0, 32, 8)]


def embed_text(text: str, dim: int = SEMANTIC_DIM_DEFAULT) -> np.ndarray:
    """Deterministic unit vector for a text label.

    Whitespace and case are normalized first, so "Floor " and "floor"
    embed identically.
    """
    if not text or not text.strip():
        raise ExtractError("cannot embed empty text")
    if dim < 1:
        raise ExtractError(f"embedding dim must be >= 1, got {dim}")
    rng = np.random.default_rng(_text_seed(text))
    vec = rng.standard_normal(dim)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        vec = np.ones(dim)
        norm = float(np.linalg.norm(vec))
    return vec / norm


def cue_embeddings(dim: int) -> dict[str, np.ndarray]:
    return {label: embed_text(label, dim) for label in CUE_LABELS}


def semantic_vector(mask: np.ndarray, grad_mean: float,
                    embeddings: dict[str, np.ndarray]) -> np.ndarray:
    """Cue-weighted semantic embedding for one mask.

    Vertical thirds of the image split the mask's pixels into ceiling,
    wall and floor evidence; texture (mean gradient magnitude) moves
    weight from all three onto "object".
    """
    height = mask.shape[0]
    ys = np.nonzero(mask)[0]
    top = float(np.mean(ys < height / 3.0))
    bottom = float(np.mean(ys >= 2.0 * height / 3.0))
    mid = max(0.0, 1.0 - top - bottom)
    smoothness = math.exp(-8.0 * max(0.0, grad_mean))
    weights = {
        "ceiling": top * smoothness,
        "wall": mid * smoothness,
        "floor": bottom * smoothness,
        "object": 1.0 - smoothness,
    }
    vec = sum(w * embeddings[label] for label, w in weights.items())
    norm = float(np.linalg.norm(vec))
    if norm < 1e-9:
        return embeddings["object"].copy()
    return vec / norm


def gradient_magnitude(img: np.ndarray) -> np.ndarray:
    """Full-resolution luminance gradient magnitude (texture measure)."""
    gy, gx = np.gradient(img @ LUMA)
    return np.hypot(gx, gy)
