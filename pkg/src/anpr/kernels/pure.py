"""Numpy fallback implementations of the per-pixel kernels.

Semantics here are the reference; the compiled backend in ``_native.pyx``
must match these outputs (see tests/test_kernels_parity.py). Both backends
share the conventions:

* erosion treats out-of-image pixels as foreground, dilation as background,
  and dilation mirrors the structuring element, so opening marks a free
  standing run either fully or not at all;
* component labels are assigned in row-major first-encounter order;
* rounding to integer pixels is floor(x + 0.5).
"""

from __future__ import annotations

import math

import numpy as np


def bilateral(img: np.ndarray, diameter: int, sigma_color: float, sigma_space: float) -> np.ndarray:
    """Edge-preserving smoothing of a (h, w) uint8 image.

    Each output pixel is the mean of its diameter x diameter window weighted
    by exp(-d^2 / 2*sigma_space^2) * exp(-dI^2 / 2*sigma_color^2); windows are
    clipped at the borders and the weights renormalized.
    """
    h, w = img.shape
    r = diameter // 2
    f = img.astype(np.float64)
    num = np.zeros((h, w))
    den = np.zeros((h, w))
    inv2sc = 1.0 / (2.0 * sigma_color * sigma_color)
    inv2ss = 1.0 / (2.0 * sigma_space * sigma_space)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            sw = math.exp(-(dx * dx + dy * dy) * inv2ss)
            y0, y1 = max(0, -dy), min(h, h - dy)
            x0, x1 = max(0, -dx), min(w, w - dx)
            if y0 >= y1 or x0 >= x1:
                continue
            src = f[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
            ctr = f[y0:y1, x0:x1]
            wgt = sw * np.exp(-((src - ctr) ** 2) * inv2sc)
            num[y0:y1, x0:x1] += wgt * src
            den[y0:y1, x0:x1] += wgt
    out = np.floor(num / den + 0.5)
    return np.clip(out, 0, 255).astype(np.uint8)


# Neighbor offsets per quantized gradient direction: (n1, n2) where n1 is the
# raster-earlier neighbor. A pixel survives when mag > mag[n1] and
# mag >= mag[n2]; out-of-image neighbors count as magnitude 0.
_NMS_NEIGHBORS = {
    0: ((0, -1), (0, 1)),  # horizontal gradient, vertical edge
    1: ((-1, -1), (1, 1)),  # 45 degrees
    2: ((-1, 0), (1, 0)),  # vertical gradient, horizontal edge
    3: ((-1, 1), (1, -1)),  # 135 degrees
}


def canny_nms(mag: np.ndarray, dbin: np.ndarray) -> np.ndarray:
    """Thin a gradient magnitude map to local maxima along the gradient.

    ``dbin`` holds the quantized direction (0..3) per pixel.
    """
    h, w = mag.shape
    pad = np.zeros((h + 2, w + 2))
    pad[1:-1, 1:-1] = mag
    keep = np.zeros((h, w), dtype=bool)
    for b, ((dy1, dx1), (dy2, dx2)) in _NMS_NEIGHBORS.items():
        n1 = pad[1 + dy1 : 1 + dy1 + h, 1 + dx1 : 1 + dx1 + w]
        n2 = pad[1 + dy2 : 1 + dy2 + h, 1 + dx2 : 1 + dx2 + w]
        sel = (dbin == b) & (mag > n1) & (mag >= n2)
        keep |= sel
    return keep


def hysteresis(candidates: np.ndarray, strong: np.ndarray) -> np.ndarray:
    """Keep strong pixels plus candidates 8-connected to them via candidates."""
    cur = strong & candidates
    if not cur.any():
        return cur
    h, w = candidates.shape
    while True:
        pad = np.zeros((h + 2, w + 2), dtype=bool)
        pad[1:-1, 1:-1] = cur
        grown = np.zeros((h, w), dtype=bool)
        for dy in range(3):
            for dx in range(3):
                grown |= pad[dy : dy + h, dx : dx + w]
        grown &= candidates
        if np.array_equal(grown, cur):
            return cur
        cur = grown


def _erode_axis(img: np.ndarray, k: int, axis: int) -> np.ndarray:
    if k == 1:
        return img.copy()
    a = (k - 1) // 2
    before, after = a, k - 1 - a
    pad_width = [(0, 0), (0, 0)]
    pad_width[axis] = (before, after)
    padded = np.pad(img, pad_width, constant_values=True)
    win = np.lib.stride_tricks.sliding_window_view(padded, k, axis=axis)
    return win.all(axis=-1)


def _dilate_axis(img: np.ndarray, k: int, axis: int) -> np.ndarray:
    if k == 1:
        return img.copy()
    a = (k - 1) // 2
    # mirrored element: offsets are negated relative to erosion
    before, after = k - 1 - a, a
    pad_width = [(0, 0), (0, 0)]
    pad_width[axis] = (before, after)
    padded = np.pad(img, pad_width, constant_values=False)
    win = np.lib.stride_tricks.sliding_window_view(padded, k, axis=axis)
    return win.any(axis=-1)


def erode_rect(img: np.ndarray, kw: int, kh: int) -> np.ndarray:
    """Binary erosion by an all-ones kw x kh rectangle."""
    return _erode_axis(_erode_axis(img, kw, 1), kh, 0)


def dilate_rect(img: np.ndarray, kw: int, kh: int) -> np.ndarray:
    """Binary dilation by the mirrored all-ones kw x kh rectangle."""
    return _dilate_axis(_dilate_axis(img, kw, 1), kh, 0)


def _row_runs(row: np.ndarray) -> np.ndarray:
    """Start/end (exclusive) column pairs of the foreground runs of one row."""
    padded = np.empty(row.size + 2, dtype=bool)
    padded[0] = padded[-1] = False
    padded[1:-1] = row
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return edges.reshape(-1, 2)


def label(img: np.ndarray, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label foreground components; returns (int32 labels, count).

    Labels run 1..count in row-major first-encounter order; 0 is background.
    """
    h, w = img.shape
    labels = np.zeros((h, w), dtype=np.int32)
    # union-find over row runs
    parent: list[int] = []

    def find(i: int) -> int:
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    slack = 1 if connectivity == 8 else 0
    runs: list[tuple[int, int, int]] = []  # (row, start, end)
    prev: list[tuple[int, int, int]] = []  # (start, end, run id)
    for r in range(h):
        cur: list[tuple[int, int, int]] = []
        for s, e in _row_runs(img[r]):
            rid = len(parent)
            parent.append(rid)
            runs.append((r, int(s), int(e)))
            for ps, pe, pid in prev:
                if s < pe + slack and ps < e + slack:
                    ra, rb = find(rid), find(pid)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
            cur.append((int(s), int(e), rid))
        prev = cur
    remap: dict[int, int] = {}
    for rid, (r, s, e) in enumerate(runs):
        root = find(rid)
        lab = remap.get(root)
        if lab is None:
            lab = len(remap) + 1
            remap[root] = lab
        labels[r, s:e] = lab
    return labels, len(remap)


def lcs_len(a: bytes, b: bytes) -> int:
    """Length of the longest common subsequence of two byte strings."""
    if not a or not b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    cur = [0] * (len(b) + 1)
    for ca in a:
        for j, cb in enumerate(b, start=1):
            if ca == cb:
                cur[j] = prev[j - 1] + 1
            else:
                x, y = prev[j], cur[j - 1]
                cur[j] = x if x >= y else y
        prev, cur = cur, prev
    return prev[len(b)]
