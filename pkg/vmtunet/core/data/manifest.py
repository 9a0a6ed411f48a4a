import json
import os
from typing import List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from vmtunet.core.errors import DecodeError, IoError
from vmtunet.core.field.field import ImageTensor
from vmtunet.core.models.models import DatasetManifest, ManifestEntry, Split

_IMAGE_SUFFIXES = (".pgm", ".ppm", ".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def save_manifest(manifest: DatasetManifest, path: str) -> None:
    """One JSON object per line: image, mask, split and the generator hash if any."""
    lines = []
    for entry in manifest.entries:
        record = entry.model_dump(mode="json")
        if manifest.spec_hash:
            record["spec_hash"] = manifest.spec_hash
        lines.append(json.dumps(record, sort_keys=True))
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("\n".join(lines) + "\n")
    except OSError as e:
        raise IoError(f"cannot write manifest '{path}': {e}") from e


def load_manifest(path: str, check_files: bool = True) -> DatasetManifest:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw_lines = [line for line in handle.read().splitlines() if line.strip()]
    except OSError as e:
        raise IoError(f"cannot read manifest '{path}': {e}") from e

    entries: List[ManifestEntry] = []
    spec_hash: Optional[str] = None
    for number, line in enumerate(raw_lines, start=1):
        try:
            record = json.loads(line)
            spec_hash = record.pop("spec_hash", spec_hash)
            entries.append(ManifestEntry.model_validate(record))
        except (json.JSONDecodeError, ValidationError, AttributeError) as e:
            raise DecodeError(path, f"line {number}: {e}") from e
    if not entries:
        raise DecodeError(path, "manifest has no entries")

    manifest = DatasetManifest(
        entries=entries, root=os.path.dirname(os.path.abspath(path)), spec_hash=spec_hash
    )
    if check_files:
        for entry in entries:
            for rel in (entry.image, entry.mask):
                if not os.path.isfile(resolve(manifest, rel)):
                    raise IoError(f"manifest '{path}' references missing file '{rel}'")
    return manifest


def resolve(manifest: DatasetManifest, rel: str) -> str:
    return rel if os.path.isabs(rel) else os.path.join(manifest.root, rel)


def load_samples(
    manifest: DatasetManifest, split: Optional[Split] = None
) -> List[Tuple[ImageTensor, np.ndarray]]:
    from vmtunet.core.data.image_io import read_image, read_mask

    entries = manifest.entries if split is None else manifest.split(split)
    return [
        (read_image(resolve(manifest, e.image)), read_mask(resolve(manifest, e.mask)))
        for e in entries
    ]


def manifest_from_directory(
    images_dir: str, masks_dir: str, split: Split = Split.TRAIN
) -> DatasetManifest:
    """Pair user-supplied images and masks whose file stems match."""

    def by_stem(directory: str):
        try:
            names = sorted(os.listdir(directory))
        except OSError as e:
            raise IoError(f"cannot list '{directory}': {e}") from e
        return {
            os.path.splitext(n)[0]: os.path.abspath(os.path.join(directory, n))
            for n in names
            if n.lower().endswith(_IMAGE_SUFFIXES)
        }

    images, masks = by_stem(images_dir), by_stem(masks_dir)
    stems = sorted(set(images) & set(masks))
    if not stems:
        raise IoError(f"no matching image/mask stems between '{images_dir}' and '{masks_dir}'")
    entries = [ManifestEntry(image=images[s], mask=masks[s], split=split) for s in stems]
    return DatasetManifest(entries=entries, root=os.path.abspath(images_dir))
