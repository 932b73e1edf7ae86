"""Pixel-level building blocks for the plate pipeline.

Images are plain numpy arrays: grayscale is uint8 (H, W), color is uint8
(H, W, 3), binary masks are bool (H, W) with True = foreground. Every op
returns a new array; nothing mutates its input. Fractional intensities are
rounded half-up (floor(x + 0.5)) so results are reproducible bit for bit.
"""

import numpy as np

from . import kernels
from .errors import DegenerateHistogramError

__all__ = [
    "to_grayscale",
    "bilateral_filter",
    "canny",
    "otsu_threshold",
    "adaptive_threshold",
    "remove_lines",
    "remove_small_blobs",
    "resize_bilinear",
    "warp_perspective",
]


def _round_u8(a: np.ndarray) -> np.ndarray:
    # half-up, not banker's rounding
    return np.clip(np.floor(a + 0.5), 0, 255).astype(np.uint8)


def _check_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("expected a uint8 (H, W) grayscale image")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("empty image")
    return img


def _check_binary(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.bool_:
        raise ValueError("expected a bool (H, W) mask")
    return img


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma: 0.299 R + 0.587 G + 0.114 B, rounded half-up."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError("expected a uint8 (H, W, 3) image")
    luma = (
        0.299 * img[:, :, 0].astype(np.float64)
        + 0.587 * img[:, :, 1]
        + 0.114 * img[:, :, 2]
    )
    return _round_u8(luma)


def bilateral_filter(
    img: np.ndarray,
    diameter: int = 9,
    sigma_color: float = 70.0,
    sigma_space: float = 70.0,
) -> np.ndarray:
    """Edge-preserving smoothing over a diameter x diameter window.

    Weights are exp(-d^2 / 2 sigma_space^2) * exp(-dI^2 / 2 sigma_color^2);
    the window is clipped at the borders and the weights renormalized.
    """
    img = _check_gray(img)
    diameter = int(diameter)
    if diameter < 1 or diameter % 2 == 0:
        raise ValueError("diameter must be odd and >= 1")
    if sigma_color <= 0 or sigma_space <= 0:
        raise ValueError("sigmas must be positive")
    return kernels.bilateral(img, diameter, float(sigma_color), float(sigma_space))


def _sobel(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel gradients with replicated borders (constant image -> zero)."""
    p = np.pad(img.astype(np.float64), 1, mode="edge")
    gx = (
        (p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:])
        - (p[:-2, :-2] + 2.0 * p[1:-1, :-2] + p[2:, :-2])
    )
    gy = (
        (p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:])
        - (p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:])
    )
    return gx, gy


def canny(img: np.ndarray, low: float = 30.0, high: float = 130.0) -> np.ndarray:
    """Classic edge chain: Sobel -> L2 magnitude -> directional NMS ->
    double-threshold hysteresis. No internal blur; smooth beforehand.
    """
    img = _check_gray(img)
    low = float(low)
    high = float(high)
    if not (0 <= low < high):
        raise ValueError("need 0 <= low < high")
    gx, gy = _sobel(img)
    mag = np.hypot(gx, gy)
    ang = np.degrees(np.arctan2(gy, gx)) % 180.0
    dbin = (np.floor(ang / 45.0 + 0.5).astype(np.int64) % 4).astype(np.uint8)
    thin = kernels.canny_nms(mag, dbin)
    candidates = thin & (mag >= low)
    strong = thin & (mag >= high)
    return kernels.hysteresis(candidates, strong)


def otsu_threshold(img: np.ndarray, invert: bool = True) -> tuple[int, np.ndarray]:
    """Global threshold maximizing between-class variance.

    Returns (t, mask). Classes are split as {p < t} vs {p >= t}; ties go to
    the smallest t. With invert=True the dark side is foreground (ink on a
    light plate); otherwise the bright side is.
    """
    img = _check_gray(img)
    hist = np.bincount(img.ravel(), minlength=256).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        raise DegenerateHistogramError("image has a single intensity")
    total = hist.sum()
    levels = np.arange(256, dtype=np.float64)
    # cumulative stats for the class {p < t}, t = 0..255
    w0 = np.concatenate(([0.0], np.cumsum(hist)))[:256]
    s0 = np.concatenate(([0.0], np.cumsum(hist * levels)))[:256]
    w1 = total - w0
    s1 = (hist * levels).sum() - s0
    with np.errstate(invalid="ignore", divide="ignore"):
        mu0 = np.where(w0 > 0, s0 / w0, 0.0)
        mu1 = np.where(w1 > 0, s1 / w1, 0.0)
    var_between = w0 * w1 * (mu0 - mu1) ** 2
    t = int(np.argmax(var_between))  # argmax takes the first (smallest) maximizer
    mask = img < t if invert else img >= t
    return t, mask


def adaptive_threshold(img: np.ndarray, block: int = 11, c: float = 2.0) -> np.ndarray:
    """Local mean threshold: foreground where pixel < (block-mean - c).

    The block is clipped at the borders, so edge pixels compare against the
    mean of the part of the window that exists.
    """
    img = _check_gray(img)
    block = int(block)
    if block < 3 or block % 2 == 0:
        raise ValueError("block must be odd and >= 3")
    h, w = img.shape
    r = block // 2
    # integral image with a zero top row / left column
    ii = np.zeros((h + 1, w + 1), dtype=np.int64)
    ii[1:, 1:] = np.cumsum(np.cumsum(img.astype(np.int64), axis=0), axis=1)
    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.clip(ys - r, 0, h)[:, None]
    y1 = np.clip(ys + r + 1, 0, h)[:, None]
    x0 = np.clip(xs - r, 0, w)[None, :]
    x1 = np.clip(xs + r + 1, 0, w)[None, :]
    area = (y1 - y0) * (x1 - x0)
    total = ii[y1, x1] - ii[y0, x1] - ii[y1, x0] + ii[y0, x0]
    mean = total / area
    return img < (mean - float(c))


def _opening(img: np.ndarray, kw: int, kh: int, iterations: int) -> np.ndarray:
    out = img
    for _ in range(iterations):
        out = kernels.erode_rect(out, kw, kh)
    for _ in range(iterations):
        out = kernels.dilate_rect(out, kw, kh)
    return out


def _subtract_thin(img: np.ndarray, mask: np.ndarray, horizontal: bool) -> np.ndarray:
    """Erase mask components no thicker than 3 px (bbox height or width)."""
    labels, count = kernels.label(mask, 8)
    if count == 0:
        return img
    out = img.copy()
    ys, xs = np.nonzero(labels)
    ids = labels[ys, xs]
    coord = ys if horizontal else xs
    lo = np.full(count + 1, np.iinfo(np.int64).max, dtype=np.int64)
    hi = np.full(count + 1, -1, dtype=np.int64)
    np.minimum.at(lo, ids, coord)
    np.maximum.at(hi, ids, coord)
    thin = (hi - lo + 1) <= 3
    thin[0] = False
    out[thin[labels]] = False
    return out


def remove_lines(
    img: np.ndarray,
    h_kernel: tuple[int, int] = (10, 1),
    v_kernel: tuple[int, int] = (1, 20),
    iterations: int = 8,
    *,
    v_iterations: int | None = None,
) -> np.ndarray:
    """Erase long thin ruling lines such as plate frames and border bars.

    Each kernel's morphological opening (erosion x N then dilation x N)
    marks candidate lines; marked components are removed only when thinner
    than 4 px, so glyph strokes survive. Kernels are (width, height).
    """
    img = _check_binary(img)
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if v_iterations is None:
        v_iterations = iterations
    h_mask = _opening(img, int(h_kernel[0]), int(h_kernel[1]), iterations)
    v_mask = _opening(img, int(v_kernel[0]), int(v_kernel[1]), v_iterations)
    out = _subtract_thin(img, h_mask, horizontal=True)
    out = _subtract_thin(out, v_mask, horizontal=False)
    return out


def remove_small_blobs(img: np.ndarray, min_size: int = 50) -> np.ndarray:
    """Drop 8-connected components smaller than min_size pixels."""
    img = _check_binary(img)
    min_size = int(min_size)
    if min_size < 0:
        raise ValueError("min_size must be >= 0")
    if min_size == 0 or not img.any():
        return img.copy()
    labels, count = kernels.label(img, 8)
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    keep = areas >= min_size
    keep[0] = False
    return keep[labels]


def resize_bilinear(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize with half-pixel-centered sampling, border clamped."""
    img = _check_gray(img)
    out_w = int(out_w)
    out_h = int(out_h)
    if out_w < 1 or out_h < 1:
        raise ValueError("output size must be >= 1")
    h, w = img.shape
    if (out_w, out_h) == (w, h):
        return img.copy()
    src = img.astype(np.float64)
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy)[:, None] + bot * fy[:, None]
    return _round_u8(out)


def warp_perspective(
    img: np.ndarray,
    h_mat: np.ndarray,
    out_w: int,
    out_h: int,
    fill: int = 0,
) -> np.ndarray:
    """Apply a 3x3 homography by inverse mapping with bilinear sampling.

    h_mat maps source coords to destination coords; pixels whose preimage
    falls outside the source take the fill value.
    """
    img = _check_gray(img)
    h_mat = np.asarray(h_mat, dtype=np.float64)
    if h_mat.shape != (3, 3):
        raise ValueError("homography must be 3x3")
    det = np.linalg.det(h_mat)
    if not np.isfinite(det) or abs(det) < 1e-12:
        raise ValueError("homography is singular")
    inv = np.linalg.inv(h_mat)
    out_w = int(out_w)
    out_h = int(out_h)
    if out_w < 1 or out_h < 1:
        raise ValueError("output size must be >= 1")
    hh, ww = img.shape
    xs, ys = np.meshgrid(np.arange(out_w, dtype=np.float64),
                         np.arange(out_h, dtype=np.float64))
    denom = inv[2, 0] * xs + inv[2, 1] * ys + inv[2, 2]
    with np.errstate(invalid="ignore", divide="ignore"):
        sx = (inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]) / denom
        sy = (inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]) / denom
    valid = (
        np.isfinite(sx) & np.isfinite(sy)
        & (sx >= 0.0) & (sx <= ww - 1.0)
        & (sy >= 0.0) & (sy <= hh - 1.0)
    )
    sx = np.where(valid, sx, 0.0)
    sy = np.where(valid, sy, 0.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, ww - 1)
    y1 = np.minimum(y0 + 1, hh - 1)
    fx = sx - x0
    fy = sy - y0
    src = img.astype(np.float64)
    val = (
        src[y0, x0] * (1 - fx) * (1 - fy)
        + src[y0, x1] * fx * (1 - fy)
        + src[y1, x0] * (1 - fx) * fy
        + src[y1, x1] * fx * fy
    )
    out = np.floor(val + 0.5)
    out = np.where(valid, out, float(int(fill)))
    return np.clip(out, 0, 255).astype(np.uint8)
