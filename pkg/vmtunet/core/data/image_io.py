"""8-bit image and mask codecs on top of Pillow (PGM/PPM, PNG and whatever else it reads)."""

import os
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from vmtunet.core.errors import DecodeError, IoError
from vmtunet.core.field.field import ImageTensor


def _open(path: str) -> Image.Image:
    try:
        with Image.open(path) as img:
            img.load()
            return img
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        raise IoError(f"cannot read '{path}': {e}") from e
    except (UnidentifiedImageError, OSError, SyntaxError) as e:
        raise DecodeError(path, str(e)) from e


def ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(parent, exist_ok=True)
    except OSError as e:
        raise IoError(f"cannot create '{parent}': {e}") from e


def _save(img: Image.Image, path: str) -> None:
    ensure_parent(path)
    try:
        img.save(path)
    except (KeyError, ValueError) as e:
        raise IoError(f"unsupported image format for '{path}': {e}") from e
    except OSError as e:
        raise IoError(f"cannot write '{path}': {e}") from e


def read_image(path: str) -> ImageTensor:
    """Grayscale files give D = 1, anything else is converted to RGB; values are v / 255."""
    img = _open(path)
    if img.mode in ("L", "1"):
        img = img.convert("L")
    else:
        img = img.convert("RGB")
    return ImageTensor(np.asarray(img, dtype=np.float64) / 255.0)


def write_image(path: str, image: Union[ImageTensor, np.ndarray]) -> None:
    values = image.values if isinstance(image, ImageTensor) else np.asarray(image, np.float64)
    if values.ndim == 3 and values.shape[2] == 1:
        values = values[:, :, 0]
    if values.min() < 0.0 or values.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    pixels = np.round(values * 255.0).astype(np.uint8)
    _save(Image.fromarray(pixels), path)


def read_mask(path: str) -> np.ndarray:
    """Binary mask as float64 {0, 1}; files must hold only {0, 255} or only {0, 1}."""
    img = _open(path)
    if img.mode not in ("L", "1"):
        raise DecodeError(path, f"mask must be single-channel, got mode {img.mode}")
    raw = np.asarray(img.convert("L"), dtype=np.uint8)
    levels = set(np.unique(raw).tolist())
    if levels <= {0, 255}:
        return (raw == 255).astype(np.float64)
    if levels <= {0, 1}:
        return raw.astype(np.float64)
    raise DecodeError(path, f"mask is not binary, found levels {sorted(levels)[:5]}")


def write_mask(path: str, mask: np.ndarray) -> None:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {mask.shape}")
    if not np.all((mask == 0) | (mask == 1)):
        raise ValueError("mask must be binary")
    _save(Image.fromarray((mask * 255).astype(np.uint8)), path)
