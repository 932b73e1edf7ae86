# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the per-pixel kernels.

Must agree with ``anpr.kernels.pure`` (the reference semantics); kept to the
same function signatures so the package selects either backend at import.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, floor

cnp.import_array()


def bilateral(img, int diameter, double sigma_color, double sigma_space):
    cdef const unsigned char[:, :] src = img
    cdef int h = src.shape[0]
    cdef int w = src.shape[1]
    cdef int r = diameter // 2
    cdef int side = 2 * r + 1
    out_arr = np.empty((h, w), dtype=np.uint8)
    cdef unsigned char[:, :] out = out_arr
    cdef double inv2sc = 1.0 / (2.0 * sigma_color * sigma_color)
    cdef double inv2ss = 1.0 / (2.0 * sigma_space * sigma_space)

    space_arr = np.empty((side, side), dtype=np.float64)
    cdef double[:, :] space = space_arr
    cdef int dy, dx
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            space[dy + r, dx + r] = exp(-(dx * dx + dy * dy) * inv2ss)

    color_arr = np.empty(511, dtype=np.float64)
    cdef double[:] color = color_arr
    cdef int d
    for d in range(-255, 256):
        color[d + 255] = exp(-(<double>d * d) * inv2sc)

    cdef int y, x, yy, xx
    cdef int ctr, diff
    cdef double num, den, wgt, v
    for y in range(h):
        for x in range(w):
            ctr = src[y, x]
            num = 0.0
            den = 0.0
            for dy in range(-r, r + 1):
                yy = y + dy
                if yy < 0 or yy >= h:
                    continue
                for dx in range(-r, r + 1):
                    xx = x + dx
                    if xx < 0 or xx >= w:
                        continue
                    diff = <int>src[yy, xx] - ctr
                    wgt = space[dy + r, dx + r] * color[diff + 255]
                    num += wgt * <double>src[yy, xx]
                    den += wgt
            v = floor(num / den + 0.5)
            if v < 0:
                v = 0
            elif v > 255:
                v = 255
            out[y, x] = <unsigned char>v
    return out_arr


def canny_nms(mag, dbin):
    cdef const double[:, :] m = mag
    cdef const unsigned char[:, :] b = dbin
    cdef int h = m.shape[0]
    cdef int w = m.shape[1]
    out_arr = np.zeros((h, w), dtype=np.uint8)
    cdef unsigned char[:, :] out = out_arr
    # raster-earlier / raster-later neighbor offsets per direction bin
    off_arr = np.array(
        [[0, -1, 0, 1], [-1, -1, 1, 1], [-1, 0, 1, 0], [-1, 1, 1, -1]], dtype=np.int32
    )
    cdef const int[:, :] off = off_arr
    cdef int y, x, y1, x1, y2, x2, k
    cdef double v, n1, n2
    for y in range(h):
        for x in range(w):
            v = m[y, x]
            k = b[y, x]
            y1 = y + off[k, 0]
            x1 = x + off[k, 1]
            y2 = y + off[k, 2]
            x2 = x + off[k, 3]
            n1 = m[y1, x1] if 0 <= y1 < h and 0 <= x1 < w else 0.0
            n2 = m[y2, x2] if 0 <= y2 < h and 0 <= x2 < w else 0.0
            if v > n1 and v >= n2:
                out[y, x] = 1
    return out_arr.view(bool)


def hysteresis(candidates, strong):
    cand_arr = np.ascontiguousarray(candidates, dtype=np.uint8)
    strong_arr = np.ascontiguousarray(strong, dtype=np.uint8)
    cdef const unsigned char[:, :] cand = cand_arr
    cdef const unsigned char[:, :] st = strong_arr
    cdef int h = cand.shape[0]
    cdef int w = cand.shape[1]
    out_arr = np.zeros((h, w), dtype=np.uint8)
    cdef unsigned char[:, :] out = out_arr
    stack_arr = np.empty(h * w, dtype=np.int64)
    cdef long long[:] stack = stack_arr
    cdef int top = 0
    cdef int y, x, yy, xx, dy, dx
    for y in range(h):
        for x in range(w):
            if st[y, x] and cand[y, x] and not out[y, x]:
                out[y, x] = 1
                stack[top] = y * w + x
                top += 1
                while top > 0:
                    top -= 1
                    yy = <int>(stack[top] // w)
                    xx = <int>(stack[top] % w)
                    for dy in range(-1, 2):
                        for dx in range(-1, 2):
                            if 0 <= yy + dy < h and 0 <= xx + dx < w:
                                if cand[yy + dy, xx + dx] and not out[yy + dy, xx + dx]:
                                    out[yy + dy, xx + dx] = 1
                                    stack[top] = (yy + dy) * w + (xx + dx)
                                    top += 1
    return out_arr.view(bool)


def erode_rect(img, int kw, int kh):
    src_arr = np.ascontiguousarray(img, dtype=np.uint8)
    cdef const unsigned char[:, :] src = src_arr
    cdef int h = src.shape[0]
    cdef int w = src.shape[1]
    cdef int ax = (kw - 1) // 2
    cdef int ay = (kh - 1) // 2
    mid_arr = np.empty((h, w), dtype=np.uint8)
    cdef unsigned char[:, :] mid = mid_arr
    out_arr = np.empty((h, w), dtype=np.uint8)
    cdef unsigned char[:, :] out = out_arr
    cdef int y, x, k, ok
    # horizontal pass; out-of-image counts as foreground
    for y in range(h):
        for x in range(w):
            ok = 1
            for k in range(-ax, kw - ax):
                if 0 <= x + k < w and not src[y, x + k]:
                    ok = 0
                    break
            mid[y, x] = ok
    for y in range(h):
        for x in range(w):
            ok = 1
            for k in range(-ay, kh - ay):
                if 0 <= y + k < h and not mid[y + k, x]:
                    ok = 0
                    break
            out[y, x] = ok
    return out_arr.view(bool)


def dilate_rect(img, int kw, int kh):
    src_arr = np.ascontiguousarray(img, dtype=np.uint8)
    cdef const unsigned char[:, :] src = src_arr
    cdef int h = src.shape[0]
    cdef int w = src.shape[1]
    cdef int ax = (kw - 1) // 2
    cdef int ay = (kh - 1) // 2
    mid_arr = np.empty((h, w), dtype=np.uint8)
    cdef unsigned char[:, :] mid = mid_arr
    out_arr = np.empty((h, w), dtype=np.uint8)
    cdef unsigned char[:, :] out = out_arr
    cdef int y, x, k, hit
    # mirrored element: offsets negated relative to erosion
    for y in range(h):
        for x in range(w):
            hit = 0
            for k in range(ax - kw + 1, ax + 1):
                if 0 <= x + k < w and src[y, x + k]:
                    hit = 1
                    break
            mid[y, x] = hit
    for y in range(h):
        for x in range(w):
            hit = 0
            for k in range(ay - kh + 1, ay + 1):
                if 0 <= y + k < h and mid[y + k, x]:
                    hit = 1
                    break
            out[y, x] = hit
    return out_arr.view(bool)


def label(img, int connectivity=8):
    src_arr = np.ascontiguousarray(img, dtype=np.uint8)
    cdef const unsigned char[:, :] src = src_arr
    cdef int h = src.shape[0]
    cdef int w = src.shape[1]
    labels_arr = np.zeros((h, w), dtype=np.int32)
    cdef int[:, :] labels = labels_arr
    parent_arr = np.empty(h * w + 1, dtype=np.int32)
    cdef int[:] parent = parent_arr
    cdef int nprov = 0
    cdef int y, x, i, p, root, a, b

    cdef int neigh[4]
    cdef int nn, k

    # first pass: provisional labels from already-visited neighbors
    for y in range(h):
        for x in range(w):
            if not src[y, x]:
                continue
            nn = 0
            if x > 0 and src[y, x - 1]:
                neigh[nn] = labels[y, x - 1]
                nn += 1
            if y > 0:
                if src[y - 1, x]:
                    neigh[nn] = labels[y - 1, x]
                    nn += 1
                if connectivity == 8:
                    if x > 0 and src[y - 1, x - 1]:
                        neigh[nn] = labels[y - 1, x - 1]
                        nn += 1
                    if x < w - 1 and src[y - 1, x + 1]:
                        neigh[nn] = labels[y - 1, x + 1]
                        nn += 1
            if nn == 0:
                nprov += 1
                parent[nprov] = nprov
                labels[y, x] = nprov
                continue
            # find minimum root among neighbors, union the rest into it
            root = 0
            for k in range(nn):
                a = neigh[k]
                while parent[a] != a:
                    a = parent[a]
                if root == 0 or a < root:
                    root = a
            for k in range(nn):
                a = neigh[k]
                while parent[a] != a:
                    p = parent[a]
                    parent[a] = root
                    a = p
                if a != root:
                    parent[a] = root
            labels[y, x] = root

    # second pass: compress and renumber in first-encounter order
    remap_arr = np.zeros(nprov + 1, dtype=np.int32)
    cdef int[:] remap = remap_arr
    cdef int count = 0
    for y in range(h):
        for x in range(w):
            i = labels[y, x]
            if i == 0:
                continue
            a = i
            while parent[a] != a:
                a = parent[a]
            if remap[a] == 0:
                count += 1
                remap[a] = count
            labels[y, x] = remap[a]
    return labels_arr, count


def lcs_len(bytes a, bytes b):
    cdef const char* pa = a
    cdef const char* pb = b
    cdef int la = len(a)
    cdef int lb = len(b)
    if la == 0 or lb == 0:
        return 0
    buf_arr = np.zeros(2 * (lb + 1), dtype=np.int32)
    cdef int[:] buf = buf_arr
    cdef int i, j, x, y, cur, prev, tmp
    prev = 0
    cur = lb + 1
    for i in range(la):
        for j in range(1, lb + 1):
            if pa[i] == pb[j - 1]:
                buf[cur + j] = buf[prev + j - 1] + 1
            else:
                x = buf[prev + j]
                y = buf[cur + j - 1]
                buf[cur + j] = x if x >= y else y
        tmp = prev
        prev = cur
        cur = tmp
    return int(buf[prev + lb])
