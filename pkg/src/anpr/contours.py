"""Connected components over binarized plate crops, and everything needed
to turn them into an ordered run of character cells: geometric filtering,
reading-order assignment (multiline aware), and square normalization.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .imgproc import resize_bilinear

__all__ = [
    "BoundingBox",
    "Component",
    "CharCandidate",
    "label_components",
    "filter_candidates",
    "order_characters",
    "crop_and_normalize",
    "candidates_csv",
]


@dataclass(frozen=True)
class BoundingBox:
    x: int
    y: int
    w: int
    h: int

    @property
    def center_y(self) -> float:
        return self.y + self.h / 2.0


@dataclass(frozen=True)
class Component:
    label: int
    area: int
    perimeter: int
    bbox: BoundingBox


@dataclass(frozen=True)
class CharCandidate:
    bbox: BoundingBox
    row: int
    order: int


def _boundary_mask(mask: np.ndarray) -> np.ndarray:
    """Pixels of `mask` with a 4-neighbor outside the mask (or the image)."""
    h, w = mask.shape
    pad = np.zeros((h + 2, w + 2), dtype=bool)
    pad[1:-1, 1:-1] = mask
    interior = (
        pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:]
    )
    return mask & ~interior


def _stats(labels: np.ndarray, count: int, mask: np.ndarray, first_label: int):
    """Component records for labels 1..count of `labels` (mask = labels > 0)."""
    if count == 0:
        return []
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    boundary = _boundary_mask(mask)
    perims = np.bincount(labels[boundary], minlength=count + 1)
    ys, xs = np.nonzero(labels)
    ids = labels[ys, xs]
    x_lo = np.full(count + 1, np.iinfo(np.int64).max, dtype=np.int64)
    y_lo = np.full(count + 1, np.iinfo(np.int64).max, dtype=np.int64)
    x_hi = np.full(count + 1, -1, dtype=np.int64)
    y_hi = np.full(count + 1, -1, dtype=np.int64)
    np.minimum.at(x_lo, ids, xs)
    np.minimum.at(y_lo, ids, ys)
    np.maximum.at(x_hi, ids, xs)
    np.maximum.at(y_hi, ids, ys)
    out = []
    for i in range(1, count + 1):
        box = BoundingBox(
            int(x_lo[i]),
            int(y_lo[i]),
            int(x_hi[i] - x_lo[i] + 1),
            int(y_hi[i] - y_lo[i] + 1),
        )
        out.append(
            Component(first_label + i - 1, int(areas[i]), int(perims[i]), box)
        )
    return out


def label_components(
    img: np.ndarray, connectivity: int = 8, mode: str = "external"
) -> list:
    """All foreground components with area, perimeter and bbox.

    mode="all" additionally reports enclosed background holes (labelled with
    the complementary connectivity) after the foreground components.
    """
    img = np.asarray(img)
    if img.dtype != np.bool_ or img.ndim != 2:
        raise ValueError("expected a bool (H, W) mask")
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    if mode not in ("external", "all"):
        raise ValueError("mode must be 'external' or 'all'")
    labels, count = kernels.label(img, connectivity)
    comps = _stats(labels, count, img, first_label=1)
    if mode == "all":
        bg = ~img
        bg_labels, bg_count = kernels.label(bg, 12 - connectivity)
        if bg_count:
            border_ids = np.unique(
                np.concatenate(
                    [bg_labels[0], bg_labels[-1], bg_labels[:, 0], bg_labels[:, -1]]
                )
            )
            enclosed = np.ones(bg_count + 1, dtype=bool)
            enclosed[border_ids] = False
            enclosed[0] = False
            if enclosed.any():
                # renumber the holes densely and append them
                remap = np.zeros(bg_count + 1, dtype=np.int64)
                kept = np.nonzero(enclosed)[0]
                remap[kept] = np.arange(1, len(kept) + 1)
                hole_labels = remap[bg_labels]
                comps += _stats(
                    hole_labels, len(kept), hole_labels > 0, first_label=count + 1
                )
    return comps


def _within(value: float, lo, hi) -> bool:
    if lo is not None and value < lo:
        return False
    if hi is not None and value > hi:
        return False
    return True


def filter_candidates(comps: list, plate_w: int, plate_h: int, cfg) -> list:
    """Keep components that look like character cells under cfg's bounds.

    Width/height/area are judged as fractions of the plate, the perimeter as
    a fraction of the plate's own perimeter, and aspect is plain w/h. Bounds
    set to None are skipped; all comparisons are inclusive.
    """
    if plate_w < 1 or plate_h < 1:
        raise ValueError("plate dimensions must be >= 1")
    plate_area = plate_w * plate_h
    plate_perim = 2 * (plate_w + plate_h)
    out = []
    for comp in comps:
        b = comp.bbox
        if not _within(b.h / plate_h, cfg.min_height_frac, cfg.max_height_frac):
            continue
        if not _within(b.w / plate_w, cfg.min_width_frac, cfg.max_width_frac):
            continue
        if not _within(b.w / b.h, cfg.min_aspect, cfg.max_aspect):
            continue
        if not _within(
            comp.area / plate_area, cfg.min_area_frac, cfg.max_area_frac
        ):
            continue
        if not _within(
            comp.perimeter / plate_perim,
            cfg.min_perimeter_frac,
            cfg.max_perimeter_frac,
        ):
            continue
        out.append(comp)
    return out


def order_characters(cands: list, plate_h: int) -> list:
    """Assign reading order: cluster into rows, top-to-bottom, then x.

    Two boxes land in the same row when their vertical centers differ by at
    most half the median box height; the relation is chained, so a slanted
    line of glyphs still forms one row.
    """
    if plate_h < 1:
        raise ValueError("plate_h must be >= 1")
    if not cands:
        return []
    n = len(cands)
    heights = sorted(c.bbox.h for c in cands)
    med = float(np.median(heights))
    tol = 0.5 * med
    centers = [c.bbox.center_y for c in cands]
    # union-find over the |dy| <= tol relation
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(centers[i] - centers[j]) <= tol:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    rows = sorted(
        groups.values(), key=lambda idxs: sum(centers[i] for i in idxs) / len(idxs)
    )
    out = []
    order = 0
    for row_idx, idxs in enumerate(rows):
        idxs.sort(
            key=lambda i: (
                cands[i].bbox.x,
                cands[i].bbox.y,
                -cands[i].area,
            )
        )
        for i in idxs:
            out.append(CharCandidate(cands[i].bbox, row_idx, order))
            order += 1
    return out


def crop_and_normalize(img: np.ndarray, box: BoundingBox, side: int = 32) -> np.ndarray:
    """Cut out a box, fit it into a side x side square, scale to [0,1].

    The longer box side maps to `side`; the other is scaled to preserve
    aspect and centered over background. Returns float64.
    """
    img = np.asarray(img)
    if img.dtype != np.bool_ or img.ndim != 2:
        raise ValueError("expected a bool (H, W) mask")
    side = int(side)
    if side < 8:
        raise ValueError("side must be >= 8")
    h, w = img.shape
    if box.x < 0 or box.y < 0 or box.x + box.w > w or box.y + box.h > h:
        raise ValueError("box out of bounds")
    if box.w < 1 or box.h < 1:
        raise ValueError("degenerate box")
    crop = (img[box.y : box.y + box.h, box.x : box.x + box.w]).astype(np.uint8) * 255
    if box.w >= box.h:
        new_w = side
        new_h = max(1, int(np.floor(box.h * side / box.w + 0.5)))
    else:
        new_h = side
        new_w = max(1, int(np.floor(box.w * side / box.h + 0.5)))
    scaled = resize_bilinear(crop, new_w, new_h)
    canvas = np.zeros((side, side), dtype=np.uint8)
    top = (side - new_h) // 2
    left = (side - new_w) // 2
    canvas[top : top + new_h, left : left + new_w] = scaled
    return canvas.astype(np.float64) / 255.0


def candidates_csv(cands: list) -> str:
    """Debug dump of ordered boxes, one row per candidate."""
    lines = ["x,y,w,h,row,order"]
    for c in cands:
        b = c.bbox
        lines.append(f"{b.x},{b.y},{b.w},{b.h},{c.row},{c.order}")
    return "\n".join(lines) + "\n"
