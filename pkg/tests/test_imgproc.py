import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from anpr import imgproc
from anpr.errors import DegenerateHistogramError


def rng(seed=0):
    return np.random.default_rng(seed)


def small_gray(min_side=1, max_side=24):
    return hnp.arrays(
        np.uint8,
        st.tuples(
            st.integers(min_side, max_side), st.integers(min_side, max_side)
        ),
        elements=st.integers(0, 255),
    )


def small_mask(min_side=1, max_side=24):
    return hnp.arrays(
        np.bool_,
        st.tuples(
            st.integers(min_side, max_side), st.integers(min_side, max_side)
        ),
    )


# ---------------------------------------------------------------- grayscale

def test_grayscale_white_and_black():
    img = np.zeros((2, 2, 3), dtype=np.uint8)
    img[0] = 255
    g = imgproc.to_grayscale(img)
    assert g[0, 0] == 255 and g[1, 1] == 0


def test_grayscale_pure_red():
    img = np.zeros((1, 1, 3), dtype=np.uint8)
    img[0, 0] = (255, 0, 0)
    # 0.299 * 255 = 76.245 -> 76
    assert imgproc.to_grayscale(img)[0, 0] == 76


def test_grayscale_matches_weighted_sum():
    img = rng(1).integers(0, 256, (17, 13, 3), dtype=np.uint8)
    g = imgproc.to_grayscale(img)
    want = np.floor(
        0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2] + 0.5
    ).astype(np.uint8)
    assert np.array_equal(g, want)


# ----------------------------------------------------------------- bilateral

def bilateral_oracle(img, d, sc, ss):
    """Naive O(H W d^2) double loop, independent of the library path."""
    h, w = img.shape
    r = d // 2
    out = np.empty_like(img)
    for y in range(h):
        for x in range(w):
            num = 0.0
            den = 0.0
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    yy, xx = y + dy, x + dx
                    if not (0 <= yy < h and 0 <= xx < w):
                        continue
                    dist2 = dy * dy + dx * dx
                    di = float(img[yy, xx]) - float(img[y, x])
                    wgt = np.exp(-dist2 / (2 * ss * ss)) * np.exp(
                        -di * di / (2 * sc * sc)
                    )
                    num += wgt * float(img[yy, xx])
                    den += wgt
            out[y, x] = min(255, int(np.floor(num / den + 0.5)))
    return out


def test_bilateral_constant_is_identity():
    img = np.full((9, 7), 100, dtype=np.uint8)
    assert np.array_equal(imgproc.bilateral_filter(img, 9, 70, 70), img)


def test_bilateral_single_pixel():
    img = np.array([[173]], dtype=np.uint8)
    assert np.array_equal(imgproc.bilateral_filter(img, 9, 70, 70), img)


def test_bilateral_center_spike_matches_oracle():
    img = np.zeros((3, 3), dtype=np.uint8)
    img[1, 1] = 200
    got = imgproc.bilateral_filter(img, 3, 70, 70)
    want = bilateral_oracle(img, 3, 70.0, 70.0)
    assert np.all(np.abs(got.astype(int) - want.astype(int)) <= 1)


def test_bilateral_random_matches_oracle():
    img = rng(7).integers(0, 256, (11, 9), dtype=np.uint8)
    got = imgproc.bilateral_filter(img, 5, 40, 30)
    want = bilateral_oracle(img, 5, 40.0, 30.0)
    assert np.all(np.abs(got.astype(int) - want.astype(int)) <= 1)


def test_bilateral_rejects_bad_args():
    img = np.zeros((4, 4), dtype=np.uint8)
    with pytest.raises(ValueError):
        imgproc.bilateral_filter(img, 4, 70, 70)
    with pytest.raises(ValueError):
        imgproc.bilateral_filter(img, -3, 70, 70)
    with pytest.raises(ValueError):
        imgproc.bilateral_filter(img, 3, 0, 70)


@settings(deadline=None, max_examples=25)
@given(small_gray(min_side=1, max_side=12))
def test_bilateral_stays_within_window_range(img):
    d = 5
    out = imgproc.bilateral_filter(img, d, 50, 50)
    h, w = img.shape
    r = d // 2
    for y in range(h):
        for x in range(w):
            win = img[max(0, y - r) : y + r + 1, max(0, x - r) : x + r + 1]
            assert win.min() <= out[y, x] <= win.max()


# --------------------------------------------------------------------- canny

def test_canny_constant_is_empty():
    img = np.full((16, 16), 77, dtype=np.uint8)
    assert not imgproc.canny(img, 30, 130).any()


def test_canny_vertical_step_single_pixel_line():
    img = np.zeros((16, 16), dtype=np.uint8)
    img[:, 8:] = 255
    edges = imgproc.canny(img, 30, 130)
    want = np.zeros((16, 16), dtype=bool)
    want[:, 7] = True  # thinning keeps the raster-first of the tied pair
    assert np.array_equal(edges, want)


def test_canny_shallow_ramp_below_low_is_empty():
    # gradient magnitude 4*step along x must stay under low=30
    img = (np.arange(16, dtype=np.uint8) * 1)[None, :].repeat(8, axis=0)
    edges = imgproc.canny(img, 30, 130)
    assert not edges.any()


def test_canny_rejects_bad_thresholds():
    img = np.zeros((4, 4), dtype=np.uint8)
    with pytest.raises(ValueError):
        imgproc.canny(img, 130, 30)
    with pytest.raises(ValueError):
        imgproc.canny(img, 50, 50)
    with pytest.raises(ValueError):
        imgproc.canny(img, -1, 30)


def sobel_mag_oracle(img):
    p = np.pad(img.astype(float), 1, mode="edge")
    kx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=float)
    ky = kx.T
    h, w = img.shape
    gx = np.zeros((h, w))
    gy = np.zeros((h, w))
    for dy in range(3):
        for dx in range(3):
            patch = p[dy : dy + h, dx : dx + w]
            gx += kx[dy, dx] * patch
            gy += ky[dy, dx] * patch
    return np.hypot(gx, gy)


@settings(deadline=None, max_examples=25)
@given(small_gray(min_side=3, max_side=20))
def test_canny_edges_exceed_low_and_reach_strong(img):
    low, high = 30.0, 130.0
    edges = imgproc.canny(img, low, high)
    if not edges.any():
        return
    mag = sobel_mag_oracle(img)
    assert (mag[edges] >= low).all()
    # every edge pixel must reach a >= high pixel through edge pixels
    h, w = img.shape
    seen = edges & (mag >= high)
    assert seen.any()
    frontier = list(zip(*np.nonzero(seen)))
    while frontier:
        y, x = frontier.pop()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w and edges[yy, xx] and not seen[yy, xx]:
                    seen[yy, xx] = True
                    frontier.append((yy, xx))
    assert np.array_equal(seen, edges)


# ---------------------------------------------------------------------- otsu

def otsu_oracle(img):
    """Brute force over all 256 split points."""
    hist = np.bincount(img.ravel(), minlength=256).astype(float)
    n = hist.sum()
    best_t, best_v = 0, -1.0
    for t in range(256):
        w0 = hist[:t].sum()
        w1 = n - w0
        if w0 == 0 or w1 == 0:
            v = 0.0
        else:
            mu0 = (hist[:t] * np.arange(t)).sum() / w0
            mu1 = (hist[t:] * np.arange(t, 256)).sum() / w1
            v = w0 * w1 * (mu0 - mu1) ** 2
        if v > best_v:
            best_t, best_v = t, v
    return best_t


def test_otsu_two_level_split():
    img = np.empty((10, 10), dtype=np.uint8)
    img[:5] = 10
    img[5:] = 200
    t, mask = imgproc.otsu_threshold(img)
    assert t == otsu_oracle(img) == 11
    assert mask[:5].all() and not mask[5:].any()  # dark half is foreground


def test_otsu_binary_tie_breaks_low():
    img = np.array([[0, 255], [255, 0]], dtype=np.uint8)
    t, _ = imgproc.otsu_threshold(img)
    assert t == otsu_oracle(img) == 1


def test_otsu_constant_raises():
    img = np.full((5, 5), 128, dtype=np.uint8)
    with pytest.raises(DegenerateHistogramError):
        imgproc.otsu_threshold(img)


def test_otsu_polarity_flag():
    img = np.empty((4, 4), dtype=np.uint8)
    img[:2] = 20
    img[2:] = 220
    t, dark = imgproc.otsu_threshold(img, invert=True)
    t2, bright = imgproc.otsu_threshold(img, invert=False)
    assert t == t2
    assert np.array_equal(dark, ~bright)


@settings(deadline=None, max_examples=50)
@given(small_gray(min_side=2, max_side=16))
def test_otsu_matches_brute_force(img):
    if np.unique(img).size < 2:
        return
    t, _ = imgproc.otsu_threshold(img)
    assert t == otsu_oracle(img)


# ------------------------------------------------------------------ adaptive

def adaptive_oracle(img, block, c):
    h, w = img.shape
    r = block // 2
    out = np.zeros((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            win = img[max(0, y - r) : y + r + 1, max(0, x - r) : x + r + 1]
            out[y, x] = img[y, x] < win.mean() - c
    return out


def test_adaptive_constant_all_background():
    img = np.full((8, 8), 90, dtype=np.uint8)
    assert not imgproc.adaptive_threshold(img, 11, 2).any()


def test_adaptive_dark_blob_found():
    img = np.full((20, 20), 240, dtype=np.uint8)
    img[8:11, 8:11] = 20
    mask = imgproc.adaptive_threshold(img, 11, 2)
    assert mask[8:11, 8:11].all()
    assert np.array_equal(mask, adaptive_oracle(img, 11, 2.0))


def test_adaptive_huge_negative_c_all_foreground():
    img = rng(3).integers(0, 256, (7, 9), dtype=np.uint8)
    assert imgproc.adaptive_threshold(img, 11, -256).all()


def test_adaptive_rejects_even_block():
    with pytest.raises(ValueError):
        imgproc.adaptive_threshold(np.zeros((4, 4), dtype=np.uint8), 10, 2)


@settings(deadline=None, max_examples=30)
@given(small_gray(min_side=1, max_side=16), st.sampled_from([3, 5, 11]))
def test_adaptive_matches_oracle(img, block):
    got = imgproc.adaptive_threshold(img, block, 2)
    assert np.array_equal(got, adaptive_oracle(img, block, 2.0))


# ------------------------------------------------------------------ de-lining

def test_remove_lines_empty_stays_empty():
    img = np.zeros((30, 50), dtype=bool)
    assert not imgproc.remove_lines(img).any()


def test_remove_lines_kills_full_width_hairline():
    img = np.zeros((20, 40), dtype=bool)
    img[10, :] = True
    out = imgproc.remove_lines(img)
    assert not out.any()


def test_remove_lines_spares_solid_block():
    img = np.zeros((8, 12), dtype=bool)
    img[:, :] = True  # 12x8 slab: marked as a line but 8 px thick
    out = imgproc.remove_lines(img)
    assert np.array_equal(out, img)


def test_remove_lines_kills_full_height_vertical_bar():
    img = np.zeros((40, 30), dtype=bool)
    img[:, 5] = True
    out = imgproc.remove_lines(img)
    assert not out.any()


def test_remove_lines_spares_glyph_strokes():
    # an H-ish glyph: two vertical strokes + crossbar, nothing spans the image
    img = np.zeros((60, 80), dtype=bool)
    img[10:40, 20:24] = True
    img[10:40, 40:44] = True
    img[24:28, 20:44] = True
    out = imgproc.remove_lines(img)
    assert np.array_equal(out, img)


@settings(deadline=None, max_examples=20)
@given(small_mask(min_side=4, max_side=30))
def test_remove_lines_anti_extensive_and_idempotent(img):
    once = imgproc.remove_lines(img)
    assert not (once & ~img).any()
    assert np.array_equal(imgproc.remove_lines(once), once)


# ----------------------------------------------------------------- de-blobbing

def components_oracle(img):
    """Flood-fill component sizes, 8-connected."""
    h, w = img.shape
    seen = np.zeros((h, w), dtype=bool)
    comps = []
    for y in range(h):
        for x in range(w):
            if img[y, x] and not seen[y, x]:
                stack = [(y, x)]
                seen[y, x] = True
                px = []
                while stack:
                    cy, cx = stack.pop()
                    px.append((cy, cx))
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            ny, nx = cy + dy, cx + dx
                            if (
                                0 <= ny < h
                                and 0 <= nx < w
                                and img[ny, nx]
                                and not seen[ny, nx]
                            ):
                                seen[ny, nx] = True
                                stack.append((ny, nx))
                comps.append(px)
    return comps


def test_remove_blobs_empty():
    img = np.zeros((5, 5), dtype=bool)
    assert not imgproc.remove_small_blobs(img, 50).any()


def test_remove_blobs_threshold_is_inclusive():
    img = np.zeros((30, 30), dtype=bool)
    img[1:8, 1:8] = True  # 49 px
    img[1:8, 12:19] = True
    img[8, 19] = True  # diagonal touch bumps the second blob to 50
    comps = components_oracle(img)
    assert sorted(len(c) for c in comps) == [49, 50]
    out = imgproc.remove_small_blobs(img, 50)
    keep = next(c for c in comps if len(c) == 50)
    want = np.zeros_like(img)
    for y, x in keep:
        want[y, x] = True
    assert np.array_equal(out, want)


def test_remove_blobs_zero_min_is_identity():
    img = rng(5).random((12, 12)) < 0.4
    assert np.array_equal(imgproc.remove_small_blobs(img, 0), img)


@settings(deadline=None, max_examples=30)
@given(small_mask(min_side=1, max_side=20), st.integers(0, 12))
def test_remove_blobs_partitions_by_area(img, m):
    out = imgproc.remove_small_blobs(img, m)
    assert not (out & ~img).any()
    for comp in components_oracle(img):
        inside = [out[y, x] for y, x in comp]
        if len(comp) >= m:
            assert all(inside)
        else:
            assert not any(inside)
    assert np.array_equal(imgproc.remove_small_blobs(out, m), out)


# -------------------------------------------------------------------- resize

def test_resize_identity():
    img = rng(11).integers(0, 256, (9, 13), dtype=np.uint8)
    assert np.array_equal(imgproc.resize_bilinear(img, 13, 9), img)


def test_resize_constant():
    img = np.full((5, 7), 42, dtype=np.uint8)
    out = imgproc.resize_bilinear(img, 19, 3)
    assert (out == 42).all() and out.shape == (3, 19)


def test_resize_2x_upsample_values():
    img = np.array([[0, 255]], dtype=np.uint8)
    out = imgproc.resize_bilinear(img, 4, 1)
    # src = (dst + .5) * .5 - .5 -> [-.25, .25, .75, 1.25], clamped
    assert out.tolist() == [[0, 64, 191, 255]]


@settings(deadline=None, max_examples=30)
@given(small_gray(min_side=1, max_side=12), st.integers(1, 20), st.integers(1, 20))
def test_resize_preserves_range(img, ow, oh):
    out = imgproc.resize_bilinear(img, ow, oh)
    assert out.shape == (oh, ow)
    assert img.min() <= out.min() and out.max() <= img.max()


# ---------------------------------------------------------------------- warp

def test_warp_identity_exact():
    img = rng(13).integers(0, 256, (8, 9), dtype=np.uint8)
    out = imgproc.warp_perspective(img, np.eye(3), 9, 8, fill=0)
    assert np.array_equal(out, img)


def test_warp_translation_fills_vacated_column():
    img = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
    h = np.array([[1.0, 0, 1], [0, 1, 0], [0, 0, 1]])
    out = imgproc.warp_perspective(img, h, 4, 3, fill=7)
    assert (out[:, 0] == 7).all()
    assert np.array_equal(out[:, 1:], img[:, :3])


def test_warp_quarter_turn_permutes_pixels():
    img = np.array([[10, 20], [30, 40]], dtype=np.uint8)
    # rotate 90 degrees CCW about the pixel-grid center (0.5, 0.5):
    # dest(x,y) = (y, 1 - x)
    h = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    out = imgproc.warp_perspective(img, h, 2, 2, fill=0)
    assert out.tolist() == [[20, 40], [10, 30]]


def test_warp_rejects_singular():
    img = np.zeros((4, 4), dtype=np.uint8)
    h = np.zeros((3, 3))
    with pytest.raises(ValueError):
        imgproc.warp_perspective(img, h, 4, 4, 0)


@settings(deadline=None, max_examples=25)
@given(small_gray(min_side=2, max_side=10))
def test_warp_range_bounded_by_source_and_fill(img):
    h = np.array([[0.9, 0.05, 1.0], [-0.02, 1.1, -0.5], [0.0001, 0.0, 1.0]])
    out = imgproc.warp_perspective(img, h, 12, 12, fill=3)
    lo = min(int(img.min()), 3)
    hi = max(int(img.max()), 3)
    assert lo <= out.min() and out.max() <= hi
