from vmtunet.core.data.image_io import read_image, read_mask, write_image, write_mask
from vmtunet.core.data.manifest import (
    load_manifest,
    load_samples,
    manifest_from_directory,
    resolve,
    save_manifest,
)
from vmtunet.core.data.synthetic import MANIFEST_NAME, generate, rasterize_disk, sample

__all__ = [
    "MANIFEST_NAME",
    "generate",
    "load_manifest",
    "load_samples",
    "manifest_from_directory",
    "rasterize_disk",
    "read_image",
    "read_mask",
    "resolve",
    "sample",
    "save_manifest",
    "write_image",
    "write_mask",
]
