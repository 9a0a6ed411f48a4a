"""Side-by-side comparison strips: one row per image, followed by its masks."""

from typing import List, Optional, Sequence

import numpy as np
from PIL import Image

from vmtunet.core.data.image_io import ensure_parent
from vmtunet.core.errors import IoError, ShapeMismatch

CONTOUR_RGB = (1.0, 0.0, 0.0)


def to_rgb(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 2:
        return np.repeat(values[:, :, None], 3, axis=2)
    if values.shape[2] == 1:
        return np.repeat(values, 3, axis=2)
    return values


def mask_boundary(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels with at least one 4-neighbor in the background."""
    m = np.asarray(mask) > 0.5
    padded = np.pad(m, 1, mode="edge")
    interior = (
        padded[2:, 1:-1] & padded[:-2, 1:-1] & padded[1:-1, 2:] & padded[1:-1, :-2] & m
    )
    return m & ~interior


def overlay_contour(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    rgb = to_rgb(image).copy()
    rgb[mask_boundary(mask)] = CONTOUR_RGB
    return rgb


def compose_panel(
    images: Sequence[np.ndarray],
    masks: Sequence[np.ndarray],
    gap: int = 2,
    contour: bool = False,
) -> np.ndarray:
    """
    Arrange ``images`` in rows; row i is image i followed by masks[i*k:(i+1)*k],
    where k = len(masks) / len(images). With ``contour`` the first mask of each
    row is also drawn over the image. Returns an RGB array in [0, 1].
    """
    if not images:
        raise ValueError("panel needs at least one image")
    if len(masks) % len(images):
        raise ShapeMismatch(f"{len(masks)} masks cannot be split over {len(images)} images")
    per_row = len(masks) // len(images)
    h, w = np.asarray(images[0]).shape[:2]
    rows: List[np.ndarray] = []
    for i, image in enumerate(images):
        row_masks = masks[i * per_row : (i + 1) * per_row]
        tiles = [overlay_contour(image, row_masks[0]) if contour and row_masks else to_rgb(image)]
        tiles += [to_rgb(m) for m in row_masks]
        for t in tiles:
            if t.shape[:2] != (h, w):
                raise ShapeMismatch(f"tile of size {t.shape[:2]} in a panel of {h}x{w} tiles")
        cols = []
        for j, t in enumerate(tiles):
            if j:
                cols.append(np.ones((h, gap, 3)))
            cols.append(t)
        rows.append(np.concatenate(cols, axis=1))
    out: List[np.ndarray] = []
    for i, r in enumerate(rows):
        if i:
            out.append(np.ones((gap, r.shape[1], 3)))
        out.append(r)
    return np.clip(np.concatenate(out, axis=0), 0.0, 1.0)


def save_panel(path: str, panel: np.ndarray, scale: Optional[int] = None) -> None:
    img = Image.fromarray(np.round(panel * 255.0).astype(np.uint8))
    if scale and scale > 1:
        img = img.resize((img.width * scale, img.height * scale), Image.Resampling.NEAREST)
    ensure_parent(path)
    try:
        img.save(path)
    except (OSError, ValueError, KeyError) as e:
        raise IoError(f"cannot write panel '{path}': {e}") from e
