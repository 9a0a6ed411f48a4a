import os

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from PIL import Image

from vmtunet.core.data import (
    MANIFEST_NAME,
    generate,
    load_manifest,
    load_samples,
    manifest_from_directory,
    rasterize_disk,
    read_image,
    read_mask,
    sample,
    write_image,
    write_mask,
)
from vmtunet.core.errors import DecodeError, IoError, ShapeMismatch
from vmtunet.core.models.models import ShapeFamily, Split, SyntheticSpec
from vmtunet.core.visualization.panel import compose_panel, mask_boundary, save_panel

# synthetic data


def test_noise_free_sample_has_two_intensities():
    spec = SyntheticSpec(size=32, noise_sigma=0.0, seed=4)
    f, g = sample(spec, 0)
    assert set(np.unique(f).tolist()) == {spec.bg_mean, spec.fg_mean}
    assert_array_equal(f == spec.fg_mean, g == 1.0)


@pytest.mark.parametrize("family", list(ShapeFamily))
def test_every_family_draws_a_shape(family):
    spec = SyntheticSpec(size=32, family=family, seed=9)
    for i in range(3):
        f, g = sample(spec, i)
        assert set(np.unique(g).tolist()) <= {0.0, 1.0}
        assert g.sum() > 0
        assert f.min() >= 0.0 and f.max() <= 1.0


def test_samples_are_independent_of_order():
    spec = SyntheticSpec(size=16, seed=5)
    late = sample(spec, 3)
    sample(spec, 0)
    assert_array_equal(sample(spec, 3)[0], late[0])


@pytest.mark.parametrize("r", [4.0, 10.0, 20.0])
def test_disk_area(r):
    area = rasterize_disk(64, 31.5, 31.5, r).sum()
    assert abs(area - np.pi * r * r) <= 4 * r


def test_generate_is_byte_identical(tmp_path, tiny_spec):
    first, second = tmp_path / "a", tmp_path / "b"
    generate(tiny_spec, str(first))
    generate(tiny_spec, str(second))
    names = sorted(
        os.path.relpath(os.path.join(d, n), first)
        for d, _, files in os.walk(first)
        for n in files
    )
    assert len(names) == 2 * (tiny_spec.count + tiny_spec.test_count) + 1
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_generated_manifest_round_trip(tmp_path, tiny_spec):
    manifest = generate(tiny_spec, str(tmp_path))
    loaded = load_manifest(str(tmp_path / MANIFEST_NAME))
    assert loaded.spec_hash == tiny_spec.spec_hash()
    assert [e.image for e in loaded.entries] == [e.image for e in manifest.entries]
    assert len(loaded.split(Split.TRAIN)) == tiny_spec.count
    test_samples = load_samples(loaded, Split.TEST)
    assert len(test_samples) == tiny_spec.test_count
    image, mask = test_samples[0]
    f, g = sample(tiny_spec, tiny_spec.count)
    assert_array_equal(mask, g)
    assert_allclose(image.values, np.round(f * 255.0) / 255.0)


def test_manifest_errors(tmp_path, tiny_spec):
    generate(tiny_spec, str(tmp_path))
    os.remove(tmp_path / "masks" / "00001.pgm")
    with pytest.raises(IoError):
        load_manifest(str(tmp_path / MANIFEST_NAME))
    assert len(load_manifest(str(tmp_path / MANIFEST_NAME), check_files=False).entries) == 6

    broken = tmp_path / "broken.jsonl"
    broken.write_text('{"image": "a.pgm", "mask": "b.pgm"}\nnot json\n')
    with pytest.raises(DecodeError) as info:
        load_manifest(str(broken), check_files=False)
    assert "line 2" in str(info.value)
    with pytest.raises(IoError):
        load_manifest(str(tmp_path / "absent.jsonl"))


def test_manifest_from_directory(tmp_path):
    images, masks = tmp_path / "images", tmp_path / "masks"
    for stem in ("a", "b"):
        write_image(str(images / f"{stem}.png"), np.full((8, 8), 0.5))
    for stem in ("a", "c"):
        write_mask(str(masks / f"{stem}.png"), np.eye(8))
    manifest = manifest_from_directory(str(images), str(masks), Split.TEST)
    assert len(manifest.entries) == 1
    assert manifest.entries[0].split == Split.TEST
    image, mask = load_samples(manifest)[0]
    assert_array_equal(mask, np.eye(8))
    with pytest.raises(IoError):
        manifest_from_directory(str(images), str(tmp_path / "missing"))


# codecs


def test_mask_round_trip_stores_0_and_255(tmp_path):
    mask = rasterize_disk(16, 7.5, 7.5, 5.0).astype(float)
    path = str(tmp_path / "mask.pgm")
    write_mask(path, mask)
    assert_array_equal(read_mask(path), mask)
    with Image.open(path) as img:
        assert set(np.unique(np.asarray(img)).tolist()) == {0, 255}


def test_mask_with_unit_levels_is_accepted(tmp_path):
    path = str(tmp_path / "unit.png")
    Image.fromarray(np.eye(5, dtype=np.uint8)).save(path)
    assert_array_equal(read_mask(path), np.eye(5))


def test_mask_with_other_levels_is_rejected(tmp_path):
    path = str(tmp_path / "gray.png")
    Image.fromarray(np.full((4, 4), 128, dtype=np.uint8)).save(path)
    with pytest.raises(DecodeError):
        read_mask(path)
    with pytest.raises(ValueError):
        write_mask(str(tmp_path / "bad.png"), np.full((4, 4), 0.5))


def test_gray_pixel_reads_as_fraction(tmp_path):
    path = str(tmp_path / "gray.pgm")
    Image.fromarray(np.full((3, 3), 128, dtype=np.uint8)).save(path)
    image = read_image(path)
    assert image.channels == 1
    assert image.values[0, 0] == pytest.approx(128 / 255)


def test_color_image_keeps_three_channels(tmp_path):
    path = str(tmp_path / "color.png")
    Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(path)
    assert read_image(path).channels == 3


def test_non_image_reports_its_path(tmp_path):
    path = tmp_path / "notes.pgm"
    path.write_text("definitely not an image")
    with pytest.raises(DecodeError) as info:
        read_image(str(path))
    assert str(path) in str(info.value)
    with pytest.raises(IoError):
        read_image(str(tmp_path / "missing.pgm"))


def test_write_image_rejects_out_of_range(tmp_path):
    with pytest.raises(ValueError):
        write_image(str(tmp_path / "x.pgm"), np.full((3, 3), 1.5))


# panels


def test_panel_layout():
    image = np.zeros((4, 4))
    masks = [np.ones((4, 4)), np.zeros((4, 4))]
    panel = compose_panel([image, image], masks + masks, gap=2)
    assert panel.shape == (4 + 2 + 4, 3 * 4 + 2 * 2, 3)
    assert np.all(panel[:, 4:6] == 1.0)
    assert np.all(panel[4:6] == 1.0)
    assert np.all(panel[:4, 6:10] == 1.0)


def test_panel_contour_and_errors():
    mask = rasterize_disk(9, 4.0, 4.0, 3.0).astype(float)
    panel = compose_panel([np.zeros((9, 9))], [mask], contour=True)
    edge = mask_boundary(mask)
    assert_array_equal(panel[:, :9][edge], np.tile([1.0, 0.0, 0.0], (edge.sum(), 1)))
    assert not edge[4, 4]
    with pytest.raises(ShapeMismatch):
        compose_panel([np.zeros((4, 4))] * 2, [np.zeros((4, 4))] * 3)
    with pytest.raises(ShapeMismatch):
        compose_panel([np.zeros((4, 4))], [np.zeros((5, 5))])


def test_save_panel_scales(tmp_path):
    path = str(tmp_path / "out" / "panel.png")
    save_panel(path, compose_panel([np.zeros((4, 4))], [np.ones((4, 4))]), scale=3)
    with Image.open(path) as img:
        assert img.size == (3 * 10, 3 * 4)
