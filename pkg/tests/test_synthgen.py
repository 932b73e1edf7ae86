"""Tests for the synthetic glyph/plate generator."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anpr.charnet import CLASSES
from anpr.contours import label_components
from anpr.imgproc import otsu_threshold, warp_perspective
from anpr.synthgen import (
    MANIFEST_NAME,
    AugmentParams,
    AugmentRanges,
    GlyphSet,
    augment,
    compose_plate,
    generate_dataset,
    load_dataset,
    render_glyph,
    rotation_homography,
    write_dataset,
)


@pytest.fixture(scope="module")
def glyphs():
    return GlyphSet.from_builtin()


# ------------------------------------------------------------------ glyph set

def test_builtin_has_all_36(glyphs):
    assert sorted(glyphs.masks) == sorted(CLASSES)
    shapes = {m.shape for m in glyphs.masks.values()}
    assert len(shapes) == 1
    for c, m in glyphs.masks.items():
        assert m.dtype == bool and m.any(), c


def test_builtin_glyphs_pairwise_distinct(glyphs):
    chars = sorted(glyphs.masks)
    for i, a in enumerate(chars):
        for b in chars[i + 1:]:
            assert not np.array_equal(glyphs.masks[a], glyphs.masks[b]), (a, b)


def test_glyphset_missing_char_rejected(glyphs):
    masks = dict(glyphs.masks)
    del masks["Q"]
    with pytest.raises(ValueError, match="Q"):
        GlyphSet(masks)


def test_glyphset_empty_mask_rejected(glyphs):
    masks = dict(glyphs.masks)
    masks["X"] = np.zeros_like(masks["X"])
    with pytest.raises(ValueError, match="empty"):
        GlyphSet(masks)


def test_glyphset_mixed_sizes_rejected(glyphs):
    masks = dict(glyphs.masks)
    masks["X"] = np.ones((4, 3), dtype=bool)
    with pytest.raises(ValueError, match="size"):
        GlyphSet(masks)


def test_from_dir_roundtrip(glyphs, tmp_path):
    from anpr.imgio import write_image

    for c in CLASSES:
        write_image(tmp_path / f"{c}.pgm", render_glyph(c, glyphs, 24))
    loaded = GlyphSet.from_dir(tmp_path)
    assert sorted(loaded.masks) == sorted(CLASSES)
    shapes = {m.shape for m in loaded.masks.values()}
    assert len(shapes) == 1


def test_from_dir_missing_file(glyphs, tmp_path):
    from anpr.imgio import write_image

    write_image(tmp_path / "A.pgm", render_glyph("A", glyphs, 24))
    with pytest.raises(ValueError, match="glyph image"):
        GlyphSet.from_dir(tmp_path)


# -------------------------------------------------------------- render_glyph

def test_render_glyph_raster(glyphs):
    img = render_glyph("A", glyphs, 32)
    assert img.shape == (32, 32) and img.dtype == np.uint8
    assert (img < 128).any()          # some ink
    assert img[0, 0] == 255 and img[-1, -1] == 255


def test_render_glyph_ink_is_centered(glyphs):
    img = render_glyph("H", glyphs, 40)
    ys, xs = np.nonzero(img < 128)
    # symmetric margins within a pixel
    assert abs(xs.min() - (39 - xs.max())) <= 1
    assert abs(ys.min() - (39 - ys.max())) <= 1


def test_render_glyph_deterministic(glyphs):
    a = render_glyph("W", glyphs, 32)
    b = render_glyph("W", GlyphSet.from_builtin(), 32)
    assert np.array_equal(a, b)


def test_render_glyph_rejects_unknown(glyphs):
    for bad in ("@", "a", "", "AB"):
        with pytest.raises(ValueError):
            render_glyph(bad, glyphs, 32)


# -------------------------------------------------------------------- augment

def test_augment_identity_is_exact():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, (40, 52)).astype(np.uint8)
    out = augment(img, AugmentParams(seed=5))
    assert np.array_equal(out, img)


def test_augment_same_seed_same_output():
    rng = np.random.default_rng(4)
    img = rng.integers(0, 256, (30, 30)).astype(np.uint8)
    p = AugmentParams(rotation=6.0, perspective_jitter=0.12, blur_sigma=0.7,
                      exposure_gain=1.3, shadow_strength=0.4, noise_prob=0.05,
                      seed=99)
    assert np.array_equal(augment(img, p), augment(img, p))


def test_augment_different_seeds_differ():
    img = np.full((30, 30), 128, dtype=np.uint8)
    a = augment(img, AugmentParams(noise_prob=0.5, seed=1))
    b = augment(img, AugmentParams(noise_prob=0.5, seed=2))
    assert not np.array_equal(a, b)


def test_augment_rotation_matches_warp(glyphs):
    img = render_glyph("R", glyphs, 48)
    out = augment(img, AugmentParams(rotation=15.0, seed=7))
    hom = rotation_homography(48, 48, 15.0)
    ref = warp_perspective(img, hom, 48, 48, fill=255)
    assert np.array_equal(out, ref)


def test_augment_blur_keeps_constant_image():
    img = np.full((25, 31), 200, dtype=np.uint8)
    out = augment(img, AugmentParams(blur_sigma=1.4, seed=0))
    assert np.array_equal(out, img)


def test_augment_exposure_scales_and_clamps():
    img = np.full((10, 10), 100, dtype=np.uint8)
    assert augment(img, AugmentParams(exposure_gain=0.5, seed=0))[0, 0] == 50
    bright = np.full((10, 10), 200, dtype=np.uint8)
    assert augment(bright, AugmentParams(exposure_gain=2.0, seed=0))[0, 0] == 255


def test_augment_shadow_ramps_down():
    img = np.full((40, 40), 200, dtype=np.uint8)
    out = augment(img, AugmentParams(shadow_strength=0.5, seed=12))
    assert out.max() == 200            # the bright end keeps full exposure
    assert out.min() in (100, 101)     # the far end is scaled by 1 - strength
    assert len(np.unique(out)) > 2     # it is a ramp, not a step


def test_augment_noise_prob_one_saturates():
    img = np.full((20, 20), 128, dtype=np.uint8)
    out = augment(img, AugmentParams(noise_prob=1.0, seed=3))
    assert set(np.unique(out)) <= {0, 255}
    assert (out == 0).any() and (out == 255).any()


def test_augment_param_validation():
    with pytest.raises(ValueError):
        AugmentParams(perspective_jitter=0.4)
    with pytest.raises(ValueError):
        AugmentParams(noise_prob=-0.1)
    with pytest.raises(ValueError):
        AugmentParams(blur_sigma=-1.0)
    with pytest.raises(ValueError):
        AugmentParams(exposure_gain=0.0)
    with pytest.raises(ValueError):
        AugmentParams(shadow_strength=1.5)


@settings(max_examples=25, deadline=None)
@given(
    rotation=st.floats(-20, 20),
    jitter=st.floats(0, 0.2),
    sigma=st.floats(0, 1.5),
    gain=st.floats(0.5, 1.8),
    shadow=st.floats(0, 0.6),
    noise=st.floats(0, 0.1),
    seed=st.integers(0, 2**32 - 1),
)
def test_augment_deterministic_and_shape_preserving(
    rotation, jitter, sigma, gain, shadow, noise, seed
):
    img = (np.arange(16 * 20).reshape(16, 20) * 3 % 256).astype(np.uint8)
    p = AugmentParams(rotation=rotation, perspective_jitter=jitter,
                      blur_sigma=sigma, exposure_gain=gain,
                      shadow_strength=shadow, noise_prob=noise, seed=seed)
    a = augment(img, p)
    assert a.shape == img.shape and a.dtype == np.uint8
    assert np.array_equal(a, augment(img, p))


# ------------------------------------------------------------------- datasets

def test_generate_one_per_class(glyphs):
    ds = generate_dataset(glyphs, per_class=1, seed=0)
    assert len(ds) == 36
    assert [s.label for s in ds] == list(range(36))


def test_generate_histogram_uniform(glyphs):
    ds = generate_dataset(glyphs, per_class=3, seed=5)
    counts = np.bincount([s.label for s in ds], minlength=36)
    assert (counts == 3).all()


def test_generate_sample_domain(glyphs):
    ds = generate_dataset(glyphs, per_class=1, seed=2)
    for s in ds:
        img = s.image
        assert img.shape == (32, 32) and img.dtype == np.float64
        assert img.min() >= 0.0 and img.max() <= 1.0
        assert (img > 0.5).any()       # ink present


def test_generate_same_seed_identical(glyphs):
    a = generate_dataset(glyphs, per_class=2, seed=9)
    b = generate_dataset(glyphs, per_class=2, seed=9)
    assert len(a) == len(b)
    for sa, sb in zip(a, b):
        assert sa.label == sb.label
        assert np.array_equal(sa.image, sb.image)


def test_generate_seed_changes_data(glyphs):
    a = generate_dataset(glyphs, per_class=1, seed=0)
    b = generate_dataset(glyphs, per_class=1, seed=1)
    assert any(not np.array_equal(x.image, y.image) for x, y in zip(a, b))


def test_generate_default_count_exceeds_2000(glyphs):
    ds = generate_dataset(glyphs, seed=0)
    assert len(ds) == 36 * 60 == 2160


def test_generate_rejects_bad_per_class(glyphs):
    with pytest.raises(ValueError):
        generate_dataset(glyphs, per_class=0)


def test_write_dataset_tree_and_reload(glyphs, tmp_path):
    out = tmp_path / "ds"
    paths = write_dataset(out, glyphs, per_class=2, seed=4)
    assert len(paths) == 72
    assert (out / MANIFEST_NAME).is_file()
    for c in CLASSES:
        assert (out / c / "0000.pgm").is_file()
        assert (out / c / "0001.pgm").is_file()

    back = load_dataset(out)
    ref = generate_dataset(glyphs, per_class=2, seed=4)
    assert len(back) == len(ref)
    for got, want in zip(back, ref):
        assert got.label == want.label
        # PGM stores 8-bit: round-trip through 0..255 must be exact
        assert np.array_equal(
            np.round(got.image * 255), np.round(want.image * 255)
        )


def test_write_dataset_byte_identical(glyphs, tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    write_dataset(a, glyphs, per_class=1, seed=11)
    write_dataset(b, glyphs, per_class=1, seed=11)
    rel_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    rel_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert rel_a == rel_b
    for rel in rel_a:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_load_dataset_requires_manifest(tmp_path):
    with pytest.raises(ValueError, match="manifest"):
        load_dataset(tmp_path)


# --------------------------------------------------------------- compose_plate

def _boxes_overlap(a, b):
    return (a.x < b.x + b.w and b.x < a.x + a.w
            and a.y < b.y + b.h and b.y < a.y + a.h)


def test_compose_plate_single_line(glyphs):
    plate, boxes = compose_plate("MH12AB1234", glyphs)
    assert plate.dtype == np.uint8 and plate.ndim == 2
    assert len(boxes) == 10
    xs = [b.x for b in boxes]
    assert xs == sorted(xs) and len(set(xs)) == 10
    h, w = plate.shape
    for b in boxes:
        assert 0 <= b.x and b.x + b.w <= w
        assert 0 <= b.y and b.y + b.h <= h
        cell = plate[b.y:b.y + b.h, b.x:b.x + b.w]
        assert (cell < 128).any()
    for i, a in enumerate(boxes):
        for b in boxes[i + 1:]:
            assert not _boxes_overlap(a, b)


def test_compose_plate_two_line_rows_disjoint(glyphs):
    plate, boxes = compose_plate("MH12AB1234", glyphs, layout="two-line")
    top, bottom = boxes[:4], boxes[4:]
    assert max(b.y + b.h for b in top) <= min(b.y for b in bottom)
    assert len(bottom) == 6


def test_compose_plate_two_line_short_text_splits_evenly(glyphs):
    _, boxes = compose_plate("ABCD", glyphs, layout="two-line")
    rows = sorted({b.y for b in boxes})
    assert len(rows) == 2
    assert sum(1 for b in boxes if b.y == rows[0]) == 2


def test_compose_plate_rejects_bad_input(glyphs):
    with pytest.raises(ValueError):
        compose_plate("", glyphs)
    with pytest.raises(ValueError):
        compose_plate("A" * 13, glyphs)
    with pytest.raises(ValueError):
        compose_plate("MH-12", glyphs)
    with pytest.raises(ValueError):
        compose_plate("ABC", glyphs, layout="diagonal")


def test_compose_plate_deterministic(glyphs):
    a, _ = compose_plate("KA05MN8877", glyphs)
    b, _ = compose_plate("KA05MN8877", glyphs)
    assert np.array_equal(a, b)


def test_compose_plate_segmentation_agrees_with_ground_truth(glyphs):
    for text in ("MH12AB1234", "0123456789", "KLMNOPQRST", "UVWXYZ0O8B"):
        plate, gt = compose_plate(text, glyphs)
        _, mask = otsu_threshold(plate, invert=True)
        comps = label_components(mask, connectivity=8, mode="external")
        assert len(comps) == len(gt), text
        got = sorted((c.bbox.x, c.bbox.y, c.bbox.w, c.bbox.h) for c in comps)
        want = sorted((b.x, b.y, b.w, b.h) for b in gt)
        for (gx, gy, gw, gh), (wx, wy, ww, wh) in zip(got, want):
            # otsu picks up a pixel or two of anti-aliased halo
            assert abs(gx - wx) <= 2 and abs(gy - wy) <= 2
            assert abs(gw - ww) <= 4 and abs(gh - wh) <= 4
