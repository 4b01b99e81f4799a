import numpy as np
import pytest


def _draw_scene(k: int, height: int = 96, width: int = 128) -> np.ndarray:
    """Corridor-like frame: three background bands plus drifting shapes."""
    img = np.zeros((height, width, 3))
    img[: height // 3] = 0.82
    img[height // 3: 2 * height // 3] = 0.55
    img[2 * height // 3:] = (0.45, 0.30, 0.20)
    x = 10 + 6 * k
    img[40:62, x: x + 18] = (0.85, 0.10, 0.10)
    x = 60 + 6 * k
    img[35:65, x: x + 14] = (0.10, 0.80, 0.15)
    yy, xx = np.mgrid[0:height, 0:width]
    disk = (xx - (100 + 4 * k)) ** 2 + (yy - 52) ** 2 <= 144
    img[disk] = (0.15, 0.20, 0.90)
    return img


def _save_png(img: np.ndarray, path) -> None:
    from PIL import Image
    Image.fromarray((img * 255.0).astype(np.uint8)).save(path)


@pytest.fixture(scope="session")
def draw_scene():
    return _draw_scene


@pytest.fixture(scope="session")
def save_png():
    return _save_png


@pytest.fixture(scope="session")
def sample_images(tmp_path_factory):
    """Five deterministic PNG frames of one synthetic corridor scene."""
    pytest.importorskip("hopmap_extract")
    outdir = tmp_path_factory.mktemp("sample_images")
    for k in range(5):
        _save_png(_draw_scene(k), outdir / f"img_{k:02d}.png")
    return outdir


@pytest.fixture(scope="session")
def extracted(sample_images, tmp_path_factory):
    """One shared default-config extraction over the sample directory."""
    hx = pytest.importorskip("hopmap_extract")
    outdir = tmp_path_factory.mktemp("extracted")
    job = hx.ExtractionJob(image_dir=sample_images,
                           output_path=outdir / "frames.jsonl")
    return job, hx.extract(job)
