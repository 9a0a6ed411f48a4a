"""Two-phase synthetic images with exact ground-truth masks."""

import os
from typing import Callable, Dict, Tuple

import numpy as np
from PIL import Image, ImageDraw
from tqdm import trange

from vmtunet.core.data.image_io import write_image, write_mask
from vmtunet.core.data.manifest import save_manifest
from vmtunet.core.models.models import (
    DatasetManifest,
    ManifestEntry,
    ShapeFamily,
    Split,
    SyntheticSpec,
)
from vmtunet.utils.logger import logger

MANIFEST_NAME = "manifest.jsonl"


def _grid(size: int) -> Tuple[np.ndarray, np.ndarray]:
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    return rows, cols


def rasterize_disk(size: int, cy: float, cx: float, r: float) -> np.ndarray:
    rows, cols = _grid(size)
    return (rows - cy) ** 2 + (cols - cx) ** 2 <= r * r


def _disk(rng: np.random.Generator, size: int) -> np.ndarray:
    r = rng.uniform(size / 10, size / 4)
    cy, cx = rng.uniform(r, size - 1 - r, size=2)
    return rasterize_disk(size, cy, cx, r)


def _rectangle(rng: np.random.Generator, size: int) -> np.ndarray:
    mask = np.zeros((size, size), dtype=bool)
    h, w = rng.integers(size // 8, size // 2, size=2, endpoint=True)
    top = rng.integers(0, size - h, endpoint=True)
    left = rng.integers(0, size - w, endpoint=True)
    mask[top : top + h, left : left + w] = True
    return mask


def _ring(rng: np.random.Generator, size: int) -> np.ndarray:
    outer = rng.uniform(size / 6, size / 3)
    inner = outer * rng.uniform(0.4, 0.7)
    cy, cx = rng.uniform(outer, size - 1 - outer, size=2)
    rows, cols = _grid(size)
    d2 = (rows - cy) ** 2 + (cols - cx) ** 2
    return (d2 <= outer**2) & (d2 > inner**2)


def _blob(rng: np.random.Generator, size: int) -> np.ndarray:
    rows, cols = _grid(size)
    cy, cx = rng.uniform(size / 4, 3 * size / 4, size=2)
    field = np.zeros((size, size))
    for _ in range(rng.integers(3, 6, endpoint=True)):
        oy, ox = rng.normal(0.0, size / 10, size=2)
        sigma = rng.uniform(size / 16, size / 8)
        field += np.exp(-((rows - cy - oy) ** 2 + (cols - cx - ox) ** 2) / (2 * sigma**2))
    return field >= 0.5


def _vessel(rng: np.random.Generator, size: int) -> np.ndarray:
    """A thin meandering curve drawn as a polyline from one border toward the opposite one."""
    canvas = Image.new("L", (size, size), 0)
    draw = ImageDraw.Draw(canvas)
    steps = 12
    y = rng.uniform(0.2 * size, 0.8 * size)
    heading = rng.normal(0.0, 0.3)
    points = [(0.0, y)]
    for i in range(1, steps + 1):
        heading = np.clip(heading + rng.normal(0.0, 0.35), -1.0, 1.0)
        x = i * (size - 1) / steps
        y = float(np.clip(y + heading * size / steps, 1, size - 2))
        points.append((x, y))
    width = int(rng.integers(1, 3, endpoint=True))
    draw.line(points, fill=255, width=width)
    mask = np.asarray(canvas) > 0
    if rng.random() < 0.5:
        mask = mask.T
    return mask


SHAPES: Dict[ShapeFamily, Callable[[np.random.Generator, int], np.ndarray]] = {
    ShapeFamily.DISKS: _disk,
    ShapeFamily.RECTANGLES: _rectangle,
    ShapeFamily.RINGS: _ring,
    ShapeFamily.BLOBS: _blob,
    ShapeFamily.VESSELS: _vessel,
}


def sample(spec: SyntheticSpec, index: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    The ``index``-th (image, mask) pair. Each index draws from its own generator
    seeded by (seed, index), so samples can be produced in any order.
    """
    rng = np.random.default_rng([spec.seed, index])
    draw_shape = SHAPES[spec.family]
    mask = np.zeros((spec.size, spec.size), dtype=bool)
    for _ in range(rng.integers(1, 3, endpoint=True)):
        mask |= draw_shape(rng, spec.size)
    g = mask.astype(np.float64)
    f = g * spec.fg_mean + (1.0 - g) * spec.bg_mean
    if spec.noise_sigma > 0:
        f = np.clip(f + rng.normal(0.0, spec.noise_sigma, size=f.shape), 0.0, 1.0)
    return f, g


def generate(spec: SyntheticSpec, out_dir: str, disable_tqdm: bool = True) -> DatasetManifest:
    """Write ``spec.count`` train and ``spec.test_count`` test pairs plus a manifest."""
    entries = []
    total = spec.count + spec.test_count
    for i in trange(total, disable=disable_tqdm, desc="Generating", leave=False):
        f, g = sample(spec, i)
        split = Split.TRAIN if i < spec.count else Split.TEST
        image_rel = os.path.join("images", f"{i:05d}.pgm")
        mask_rel = os.path.join("masks", f"{i:05d}.pgm")
        write_image(os.path.join(out_dir, image_rel), f)
        write_mask(os.path.join(out_dir, mask_rel), g)
        entries.append(ManifestEntry(image=image_rel, mask=mask_rel, split=split))
    manifest = DatasetManifest(entries=entries, root=out_dir, spec_hash=spec.spec_hash())
    save_manifest(manifest, os.path.join(out_dir, MANIFEST_NAME))
    logger.info(
        f"Generated {spec.count} train + {spec.test_count} test {spec.family.value} samples in {out_dir}"
    )
    return manifest
