"""Synthetic character and plate generator.

Renders the built-in glyphs (or a user-supplied font directory), pushes
them through a bag of capture-style degradations (rotation, perspective,
blur, exposure, shadow, salt-and-pepper), and composes whole plate
images with ground-truth character boxes.  Everything is a pure function
of its inputs plus an explicit 64-bit seed, so datasets regenerate
byte-for-byte.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import glyphdata, netpbm
from .charnet import CLASSES, LabeledSample
from .contours import BoundingBox, crop_and_normalize
from .errors import DegenerateHistogramError
from .imgproc import _round_u8, otsu_threshold, resize_bilinear, warp_perspective

__all__ = [
    "GlyphSet",
    "AugmentParams",
    "AugmentRanges",
    "rotation_homography",
    "render_glyph",
    "augment",
    "generate_dataset",
    "write_dataset",
    "load_dataset",
    "compose_plate",
    "MANIFEST_NAME",
]

MANIFEST_NAME = "manifest.csv"

# nominal cell for glyphs loaded from a user directory; the builtin font
# stays at its native 5x7
_NOMINAL_W, _NOMINAL_H = 20, 28

# plate geometry (pixels): cell per character, gap between cells, margins
_GLYPH_H = 61
_CELL_W = 44
_GAP = 11
_MARGIN_X = 15
_PLATE_H = 160          # single line; leaves headroom for rotated variants
_MARGIN_Y2 = 15         # two-line layout margins (top/middle/bottom)

# character samples: glyph fit to 32px, padded onto a 48px canvas so
# geometric augmentation has room to move it around
_SAMPLE_SIDE = 32
_CANVAS_SIDE = 48


class GlyphSet:
    """36 binary glyph masks (True = ink) of one common nominal size."""

    def __init__(self, masks: dict[str, np.ndarray]):
        missing = sorted(set(CLASSES) - set(masks))
        if missing:
            raise ValueError(f"glyph set is missing {''.join(missing)!r}")
        shapes = {masks[c].shape for c in CLASSES}
        if len(shapes) != 1:
            raise ValueError(f"glyph masks disagree on size: {sorted(shapes)}")
        clean = {}
        for c in CLASSES:
            m = np.asarray(masks[c], dtype=bool)
            if not m.any():
                raise ValueError(f"glyph for {c!r} is empty")
            clean[c] = m
        self.masks = clean

    @classmethod
    def from_builtin(cls) -> "GlyphSet":
        masks = {
            c: _bridge_diagonals(
                np.array([[ch == "#" for ch in row] for row in rows], dtype=bool)
            )
            for c, rows in glyphdata.GLYPHS.items()
        }
        return cls(masks)

    @classmethod
    def from_dir(cls, path: str | Path) -> "GlyphSet":
        """Load an override font: one image per character, named '<char>.<ext>'.

        Dark pixels (< 128) count as ink.  Each glyph is cropped to its
        ink and rescaled to a common nominal cell so mixed-size source
        images are fine.
        """
        from .imgio import read_image_gray

        root = Path(path)
        masks = {}
        for c in CLASSES:
            hits = sorted(p for p in root.glob(c + ".*") if p.is_file())
            if not hits:
                raise ValueError(f"no glyph image for {c!r} in {root}")
            gray = read_image_gray(hits[0])
            ink = gray < 128
            if not ink.any():
                raise ValueError(f"glyph image {hits[0]} has no dark pixels")
            ys, xs = np.nonzero(ink)
            ink = ink[ys.min():ys.max() + 1, xs.min():xs.max() + 1]
            masks[c] = _bridge_diagonals(_fit_mask(ink, _NOMINAL_W, _NOMINAL_H))
        return cls(masks)


def _bridge_diagonals(mask: np.ndarray) -> np.ndarray:
    """Double a mask's resolution and weld diagonal stroke contacts.

    Two ink cells touching only at a corner scale to regions with a single
    point of contact, which a threshold can cut.  At 2x we add one
    half-cell nub per diagonal pair so every stroke is edge-connected.
    """
    out = np.kron(mask, np.ones((2, 2), dtype=bool))
    rr, cc = np.nonzero(mask[:-1, :-1] & mask[1:, 1:])
    out[2 * rr + 1, 2 * cc + 2] = True
    rr, cc = np.nonzero(mask[:-1, 1:] & mask[1:, :-1])
    out[2 * rr + 1, 2 * cc + 1] = True
    return out


def _fit_mask(mask: np.ndarray, cell_w: int, cell_h: int) -> np.ndarray:
    """Scale a boolean mask into cell_w x cell_h, aspect kept, centered."""
    mh, mw = mask.shape
    scale = min(cell_w / mw, cell_h / mh)
    gw = max(1, int(math.floor(mw * scale + 0.5)))
    gh = max(1, int(math.floor(mh * scale + 0.5)))
    gray = resize_bilinear(np.where(mask, 255, 0).astype(np.uint8), gw, gh)
    out = np.zeros((cell_h, cell_w), dtype=bool)
    y0 = (cell_h - gh) // 2
    x0 = (cell_w - gw) // 2
    out[y0:y0 + gh, x0:x0 + gw] = gray >= 128
    return out


@dataclass(frozen=True)
class AugmentParams:
    rotation: float = 0.0            # degrees, about the image center
    perspective_jitter: float = 0.0  # corner displacement as a fraction of size
    blur_sigma: float = 0.0          # gaussian sigma in pixels
    exposure_gain: float = 1.0
    shadow_strength: float = 0.0     # intensity ramps down to 1 - strength
    noise_prob: float = 0.0          # per-pixel salt/pepper probability
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.perspective_jitter <= 0.3:
            raise ValueError("perspective_jitter must be in [0, 0.3]")
        if not 0.0 <= self.noise_prob <= 1.0:
            raise ValueError("noise_prob must be in [0, 1]")
        if self.blur_sigma < 0.0:
            raise ValueError("blur_sigma must be >= 0")
        if self.exposure_gain <= 0.0:
            raise ValueError("exposure_gain must be > 0")
        if not 0.0 <= self.shadow_strength <= 1.0:
            raise ValueError("shadow_strength must be in [0, 1]")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class AugmentRanges:
    """Upper bounds (and the gain interval) that dataset params are drawn from."""

    rotation: float = 15.0           # degrees, symmetric
    perspective_jitter: float = 0.15
    blur_sigma: float = 1.5
    gain_lo: float = 0.6
    gain_hi: float = 1.6
    shadow_strength: float = 0.5
    noise_prob: float = 0.02

    def __post_init__(self):
        if self.rotation < 0 or self.blur_sigma < 0:
            raise ValueError("ranges must be non-negative")
        if not 0.0 <= self.perspective_jitter <= 0.3:
            raise ValueError("perspective_jitter range must be in [0, 0.3]")
        if not 0.0 <= self.shadow_strength <= 1.0:
            raise ValueError("shadow_strength range must be in [0, 1]")
        if not 0.0 <= self.noise_prob <= 1.0:
            raise ValueError("noise_prob range must be in [0, 1]")
        if self.gain_lo <= 0.0 or self.gain_hi < self.gain_lo:
            raise ValueError("need 0 < gain_lo <= gain_hi")


def rotation_homography(width: int, height: int, degrees: float) -> np.ndarray:
    """Forward homography rotating about the pixel-grid center."""
    th = math.radians(degrees)
    c, s = math.cos(th), math.sin(th)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    t_fwd = np.array([[1.0, 0.0, cx], [0.0, 1.0, cy], [0.0, 0.0, 1.0]])
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    t_back = np.array([[1.0, 0.0, -cx], [0.0, 1.0, -cy], [0.0, 0.0, 1.0]])
    return t_fwd @ rot @ t_back


def _solve_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Homography mapping 4 source points onto 4 destination points."""
    a = np.zeros((8, 8), dtype=np.float64)
    b = np.zeros(8, dtype=np.float64)
    for i in range(4):
        x, y = src[i]
        u, v = dst[i]
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    h = np.linalg.solve(a, b)
    return np.array([
        [h[0], h[1], h[2]],
        [h[3], h[4], h[5]],
        [h[6], h[7], 1.0],
    ])


def render_glyph(c: str, glyphs: GlyphSet, side: int = 32) -> np.ndarray:
    """Draw one character dark-on-light, centered in a side x side raster."""
    if c not in glyphs.masks:
        raise ValueError(f"unsupported character {c!r}")
    side = int(side)
    if side < 1:
        raise ValueError("side must be >= 1")
    mask = glyphs.masks[c]
    mh, mw = mask.shape
    scale = side / max(mh, mw)
    gh = min(side, max(1, int(math.floor(mh * scale + 0.5))))
    gw = min(side, max(1, int(math.floor(mw * scale + 0.5))))
    glyph = resize_bilinear(np.where(mask, 0, 255).astype(np.uint8), gw, gh)
    out = np.full((side, side), 255, dtype=np.uint8)
    y0 = (side - gh) // 2
    x0 = (side - gw) // 2
    out[y0:y0 + gh, x0:x0 + gw] = glyph
    return out


def _gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    denom = 2.0 * sigma * sigma
    if denom == 0.0:  # sigma so small the kernel degenerates to a delta
        return img.copy()
    radius = max(1, int(math.ceil(3.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    kern = np.exp(-(xs * xs) / denom)
    kern /= kern.sum()
    padded = np.pad(img.astype(np.float64), radius, mode="edge")
    # separable: rows then columns
    acc = np.zeros((img.shape[0] + 2 * radius, img.shape[1]), dtype=np.float64)
    for k, wgt in enumerate(kern):
        acc += wgt * padded[:, k:k + img.shape[1]]
    out = np.zeros(img.shape, dtype=np.float64)
    for k, wgt in enumerate(kern):
        out += wgt * acc[k:k + img.shape[0], :]
    return _round_u8(out)


def augment(img: np.ndarray, p: AugmentParams) -> np.ndarray:
    """Degrade an image: rotate, corner-jitter, blur, expose, shade, speckle.

    Stages run in that fixed order and all randomness comes from p.seed,
    so equal (img, p) means equal output.  Identity parameters return the
    input unchanged, bit for bit.
    """
    if img.ndim != 2:
        raise ValueError("expected a grayscale image")
    out = np.ascontiguousarray(img, dtype=np.uint8)
    h, w = out.shape
    rng = np.random.default_rng(int(p.seed))

    # random draws happen unconditionally and in a fixed order so that the
    # stream stays aligned whichever stages are active
    jit = p.perspective_jitter
    dx = rng.uniform(-jit * w, jit * w, size=4)
    dy = rng.uniform(-jit * h, jit * h, size=4)
    shadow_angle = rng.uniform(0.0, 2.0 * math.pi)
    noise_field = rng.random((h, w))
    salt = rng.random((h, w)) < 0.5

    hom = None
    if p.rotation != 0.0:
        hom = rotation_homography(w, h, p.rotation)
    if jit > 0.0:
        corners = np.array(
            [[0.0, 0.0], [w - 1.0, 0.0], [w - 1.0, h - 1.0], [0.0, h - 1.0]]
        )
        moved = corners + np.stack([dx, dy], axis=1)
        jitter_h = _solve_homography(corners, moved)
        hom = jitter_h if hom is None else jitter_h @ hom
    if hom is not None:
        out = warp_perspective(out, hom, w, h, fill=255)

    if p.blur_sigma > 0.0:
        out = _gaussian_blur(out, p.blur_sigma)

    if p.exposure_gain != 1.0:
        out = _round_u8(out.astype(np.float64) * p.exposure_gain)

    if p.shadow_strength > 0.0:
        ux, uy = math.cos(shadow_angle), math.sin(shadow_angle)
        xs = np.arange(w, dtype=np.float64)
        ys = np.arange(h, dtype=np.float64)
        proj = ux * xs[None, :] + uy * ys[:, None]
        span = proj.max() - proj.min()
        if span > 0.0:
            t = (proj - proj.min()) / span
        else:
            t = np.zeros_like(proj)
        out = _round_u8(out.astype(np.float64) * (1.0 - p.shadow_strength * t))

    if p.noise_prob > 0.0:
        flip = noise_field < p.noise_prob
        out = out.copy()
        out[flip & salt] = 255
        out[flip & ~salt] = 0

    return out


def _draw_params(rng: np.random.Generator, ranges: AugmentRanges) -> AugmentParams:
    rotation = rng.uniform(-ranges.rotation, ranges.rotation)
    jitter = rng.uniform(0.0, ranges.perspective_jitter)
    sigma = rng.uniform(0.0, ranges.blur_sigma)
    gain = rng.uniform(ranges.gain_lo, ranges.gain_hi)
    shadow = rng.uniform(0.0, ranges.shadow_strength)
    noise = rng.uniform(0.0, ranges.noise_prob)
    seed = int(rng.integers(0, 2 ** 63))
    return AugmentParams(
        rotation=rotation,
        perspective_jitter=jitter,
        blur_sigma=sigma,
        exposure_gain=gain,
        shadow_strength=shadow,
        noise_prob=noise,
        seed=seed,
    )


def _sample_image(c: str, glyphs: GlyphSet, p: AugmentParams) -> np.ndarray:
    glyph = render_glyph(c, glyphs, _SAMPLE_SIDE)
    canvas = np.full((_CANVAS_SIDE, _CANVAS_SIDE), 255, dtype=np.uint8)
    off = (_CANVAS_SIDE - _SAMPLE_SIDE) // 2
    canvas[off:off + _SAMPLE_SIDE, off:off + _SAMPLE_SIDE] = glyph
    canvas = augment(canvas, p)
    try:
        _, ink = otsu_threshold(canvas, invert=True)
    except DegenerateHistogramError:
        ink = canvas < 128
    if ink.any():
        ys, xs = np.nonzero(ink)
        box = BoundingBox(
            int(xs.min()), int(ys.min()),
            int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1),
        )
    else:
        box = BoundingBox(0, 0, _CANVAS_SIDE, _CANVAS_SIDE)
    return crop_and_normalize(ink, box, _SAMPLE_SIDE)


def _per_sample_rng(seed: int, class_index: int, k: int) -> np.random.Generator:
    # seed space partitioned per sample so generation order (or parallel
    # workers) cannot change the result
    ss = np.random.SeedSequence((int(seed), class_index, k))
    return np.random.default_rng(ss)


def generate_dataset(
    glyphs: GlyphSet,
    per_class: int = 60,
    ranges: AugmentRanges | None = None,
    seed: int = 0,
) -> list[LabeledSample]:
    """36 * per_class augmented character samples, exactly balanced."""
    per_class = int(per_class)
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if ranges is None:
        ranges = AugmentRanges()
    samples = []
    for ci, c in enumerate(CLASSES):
        for k in range(per_class):
            rng = _per_sample_rng(seed, ci, k)
            p = _draw_params(rng, ranges)
            samples.append(LabeledSample(image=_sample_image(c, glyphs, p), label=ci))
    return samples


def _format_param(x: float) -> str:
    return repr(float(x))


def write_dataset(
    out_dir: str | Path,
    glyphs: GlyphSet | None = None,
    per_class: int = 60,
    ranges: AugmentRanges | None = None,
    seed: int = 0,
) -> list[Path]:
    """Generate and store a dataset: per-class PGM dirs plus a manifest CSV.

    Returns the written sample paths in manifest order.  Identical
    arguments produce a byte-identical tree.
    """
    per_class = int(per_class)
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if glyphs is None:
        glyphs = GlyphSet.from_builtin()
    if ranges is None:
        ranges = AugmentRanges()
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    written = []
    for ci, c in enumerate(CLASSES):
        cdir = root / c
        cdir.mkdir(exist_ok=True)
        for k in range(per_class):
            rng = _per_sample_rng(seed, ci, k)
            p = _draw_params(rng, ranges)
            image = _sample_image(c, glyphs, p)
            rel = f"{c}/{k:04d}.pgm"
            path = root / rel
            path.write_bytes(netpbm.write_pgm(_round_u8(image * 255.0)))
            written.append(path)
            rows.append([
                rel, c, str(p.seed),
                _format_param(p.rotation),
                _format_param(p.perspective_jitter),
                _format_param(p.blur_sigma),
                _format_param(p.exposure_gain),
                _format_param(p.shadow_strength),
                _format_param(p.noise_prob),
            ])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([
        "path", "label", "seed", "rotation", "perspective_jitter",
        "blur_sigma", "exposure_gain", "shadow_strength", "noise_prob",
    ])
    writer.writerows(rows)
    (root / MANIFEST_NAME).write_text(buf.getvalue(), encoding="ascii")
    return written


def load_dataset(in_dir: str | Path) -> list[LabeledSample]:
    """Read back a dataset tree written by write_dataset."""
    root = Path(in_dir)
    manifest = root / MANIFEST_NAME
    if not manifest.is_file():
        raise ValueError(f"no {MANIFEST_NAME} in {root}")
    samples = []
    with manifest.open(newline="", encoding="ascii") as fh:
        for row in csv.DictReader(fh):
            label = row["label"]
            if label not in CLASSES:
                raise ValueError(f"manifest label {label!r} is not a plate character")
            img = netpbm.read_pgm((root / row["path"]).read_bytes())
            samples.append(LabeledSample(
                image=img.astype(np.float64) / 255.0,
                label=CLASSES.index(label),
            ))
    return samples


def _layout_rows(text: str, layout: str) -> list[str]:
    if layout == "single":
        return [text]
    if layout in ("two-line", "two_line"):
        if len(text) >= 7:
            head = 4
        else:
            head = (len(text) + 1) // 2
        rows = [text[:head], text[head:]]
        return [r for r in rows if r]
    raise ValueError(f"unknown layout {layout!r}")


def compose_plate(
    text: str,
    glyphs: GlyphSet | None = None,
    layout: str = "single",
) -> tuple[np.ndarray, list[BoundingBox]]:
    """Render a plate image; returns it with per-character ink boxes.

    Boxes come back in text order (top row first for two-line plates),
    never overlapping and always inside the raster.
    """
    if glyphs is None:
        glyphs = GlyphSet.from_builtin()
    if not 1 <= len(text) <= 12:
        raise ValueError("plate text must be 1..12 characters")
    for c in text:
        if c not in glyphs.masks:
            raise ValueError(f"unsupported character {c!r}")
    rows = _layout_rows(text, layout)
    ncol = max(len(r) for r in rows)
    width = 2 * _MARGIN_X + ncol * _CELL_W + (ncol - 1) * _GAP
    if len(rows) == 1:
        height = _PLATE_H
        y_tops = [(height - _GLYPH_H) // 2]
    else:
        height = 2 * _GLYPH_H + 3 * _MARGIN_Y2
        y_tops = [_MARGIN_Y2, _MARGIN_Y2 + _GLYPH_H + _MARGIN_Y2]
    plate = np.full((height, width), 255, dtype=np.uint8)
    boxes = []
    for row, y_top in zip(rows, y_tops):
        x = _MARGIN_X
        for c in row:
            boxes.append(_stamp_glyph(plate, glyphs.masks[c], x, y_top))
            x += _CELL_W + _GAP
    return plate, boxes


def _stamp_glyph(
    plate: np.ndarray, mask: np.ndarray, x: int, y: int
) -> BoundingBox:
    """Darken one glyph into its cell; returns the ink bounding box."""
    mh, mw = mask.shape
    scale = min(_CELL_W / mw, _GLYPH_H / mh)
    gw = max(1, int(math.floor(mw * scale + 0.5)))
    gh = max(1, int(math.floor(mh * scale + 0.5)))
    glyph = resize_bilinear(np.where(mask, 0, 255).astype(np.uint8), gw, gh)
    px = x + (_CELL_W - gw) // 2
    py = y + (_GLYPH_H - gh) // 2
    region = plate[py:py + gh, px:px + gw]
    np.minimum(region, glyph, out=region)
    ink = glyph < 128
    ys, xs = np.nonzero(ink)
    return BoundingBox(
        px + int(xs.min()), py + int(ys.min()),
        int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1),
    )
