"""Reading and writing of netpbm rasters (PGM P2/P5, PBM P1).

These formats carry the golden-test fixtures: the writers emit one
canonical byte layout so fixture comparison can be bit-exact.
"""

from __future__ import annotations

import numpy as np

from .errors import AnprError


def _tokens(data: bytes):
    """Yield whitespace-separated tokens, skipping '#' comments."""
    i, n = 0, len(data)
    while i < n:
        c = data[i : i + 1]
        if c.isspace():
            i += 1
        elif c == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        else:
            j = i
            while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            yield data[i:j], j
            i = j


def read_pgm(data: bytes) -> np.ndarray:
    """Decode a P2 (ascii) or P5 (binary) PGM into a (h, w) uint8 array."""
    toks = _tokens(data)
    try:
        magic, _ = next(toks)
        if magic not in (b"P2", b"P5"):
            raise AnprError(f"not a PGM stream (magic {magic!r})")
        (w, _), (h, _), (maxval, end) = next(toks), next(toks), next(toks)
        w, h, maxval = int(w), int(h), int(maxval)
    except StopIteration:
        raise AnprError("truncated PGM header") from None
    if w < 1 or h < 1 or not (0 < maxval < 256):
        raise AnprError("bad PGM dimensions or maxval")
    if magic == b"P5":
        raw = data[end + 1 : end + 1 + w * h]
        if len(raw) != w * h:
            raise AnprError("truncated P5 pixel data")
        return np.frombuffer(raw, dtype=np.uint8).reshape(h, w).copy()
    vals = []
    for tok, _ in toks:
        vals.append(int(tok))
        if len(vals) == w * h:
            break
    if len(vals) != w * h:
        raise AnprError("truncated P2 pixel data")
    arr = np.array(vals, dtype=np.int64)
    if arr.min() < 0 or arr.max() > maxval:
        raise AnprError("P2 sample out of range")
    return arr.astype(np.uint8).reshape(h, w)


def write_pgm(img: np.ndarray, binary: bool = True) -> bytes:
    """Encode a (h, w) uint8 array as canonical P5 (or P2) bytes."""
    img = np.asarray(img, dtype=np.uint8)
    if img.ndim != 2:
        raise AnprError("PGM writer expects a 2-d grayscale array")
    h, w = img.shape
    if binary:
        return b"P5\n%d %d\n255\n" % (w, h) + img.tobytes()
    body = "\n".join(" ".join(str(v) for v in row) for row in img.tolist())
    return ("P2\n%d %d\n255\n%s\n" % (w, h, body)).encode("ascii")


def read_pbm(data: bytes) -> np.ndarray:
    """Decode a P1 (ascii) PBM into a (h, w) bool array; 1 = foreground."""
    toks = _tokens(data)
    try:
        magic, _ = next(toks)
        if magic != b"P1":
            raise AnprError(f"not an ascii PBM stream (magic {magic!r})")
        (w, _), (h, _) = next(toks), next(toks)
        w, h = int(w), int(h)
    except StopIteration:
        raise AnprError("truncated PBM header") from None
    if w < 1 or h < 1:
        raise AnprError("bad PBM dimensions")
    bits = []
    for tok, _ in toks:
        for ch in tok.decode("ascii"):
            if ch not in "01":
                raise AnprError(f"bad PBM sample {ch!r}")
            bits.append(ch == "1")
            if len(bits) == w * h:
                break
        if len(bits) == w * h:
            break
    if len(bits) != w * h:
        raise AnprError("truncated PBM pixel data")
    return np.array(bits, dtype=bool).reshape(h, w)


def write_pbm(img: np.ndarray) -> bytes:
    """Encode a (h, w) bool array as canonical P1 bytes; True maps to 1."""
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != bool:
        raise AnprError("PBM writer expects a 2-d bool array")
    h, w = img.shape
    body = "\n".join(" ".join("1" if v else "0" for v in row) for row in img.tolist())
    return ("P1\n%d %d\n%s\n" % (w, h, body)).encode("ascii")
