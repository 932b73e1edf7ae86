"""End-to-end plate recognition: crop -> binary -> characters -> text.

Also the persistence side (image named after its text, results.csv) and
the accuracy metric/report used to score predictions against ground
truth.  Detection is optional: bypass mode treats a whole image as one
plate crop, so everything downstream works without detector weights.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from . import darknet, kernels
from .charnet import CLASSES, CharModel, probs_batch
from .config import PipelineConfig
from .contours import (
    BoundingBox,
    crop_and_normalize,
    filter_candidates,
    label_components,
    order_characters,
)
from .errors import DegenerateHistogramError
from .imgproc import (
    adaptive_threshold,
    bilateral_filter,
    canny,
    otsu_threshold,
    remove_lines,
    remove_small_blobs,
    to_grayscale,
)

__all__ = [
    "PlateResult",
    "ReportRow",
    "AccuracyReport",
    "preprocess_plate",
    "recognize_plate",
    "process_image",
    "detection_to_source_box",
    "persist_result",
    "character_accuracy",
    "evaluate_batch",
    "render_report",
    "report_csv",
    "RESULTS_CSV_HEADER",
]

MIN_CROP_W, MIN_CROP_H = 20, 10
RESULTS_CSV_HEADER = "source,file,text,mean_prob,total_ms"


@dataclass(frozen=True, eq=False)
class PlateResult:
    text: str
    boxes: tuple            # BoundingBox per character, reading order
    probs: tuple            # (n_classes,) probability vector per character
    timings: dict           # milliseconds: detect / preprocess / segment / classify
    source: str = ""
    unreadable: bool = False
    plate_box: BoundingBox | None = None  # where the crop sits in the frame

    @property
    def mean_prob(self) -> float:
        if not self.probs:
            return 0.0
        return float(np.mean([p.max() for p in self.probs]))

    @property
    def total_ms(self) -> float:
        return float(sum(self.timings.values()))


def _as_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim == 3:
        return to_grayscale(img)
    if img.ndim == 2:
        if img.dtype != np.uint8:
            raise ValueError("expected a uint8 image")
        return img
    raise ValueError("expected (H, W) grayscale or (H, W, 3) RGB")


def preprocess_plate(crop: np.ndarray, cfg: PipelineConfig) -> np.ndarray:
    """Plate crop to character-foreground binary mask, dims preserved."""
    gray = _as_gray(crop)
    h, w = gray.shape
    if w < MIN_CROP_W or h < MIN_CROP_H:
        raise ValueError(
            f"crop {w}x{h} below minimum {MIN_CROP_W}x{MIN_CROP_H}"
        )
    smooth = bilateral_filter(
        gray,
        cfg.bilateral_diameter,
        cfg.bilateral_sigma_color,
        cfg.bilateral_sigma_space,
    )
    if cfg.binarization == "otsu":
        try:
            _, mask = otsu_threshold(smooth, invert=True)
        except DegenerateHistogramError:
            mask = np.zeros(smooth.shape, dtype=bool)
    elif cfg.binarization == "adaptive":
        mask = adaptive_threshold(smooth, cfg.adaptive_block, cfg.adaptive_c)
    elif cfg.binarization == "canny":
        mask = canny(smooth, cfg.canny_low, cfg.canny_high)
    else:
        raise ValueError(f"unknown binarization {cfg.binarization!r}")
    mask = remove_lines(
        mask,
        cfg.h_line_kernel,
        cfg.v_line_kernel,
        cfg.h_line_iterations,
        v_iterations=cfg.v_line_iterations,
    )
    return remove_small_blobs(mask, cfg.blob_min_size)


def recognize_plate(
    crop: np.ndarray,
    cfg: PipelineConfig,
    model: CharModel,
    source: str = "",
) -> PlateResult:
    """Full read of one plate crop; empty text (flagged) when nothing survives."""
    t0 = time.perf_counter()
    mask = preprocess_plate(crop, cfg)
    t1 = time.perf_counter()
    h, w = mask.shape
    comps = label_components(mask, connectivity=8, mode=cfg.contour_mode)
    cands = filter_candidates(comps, w, h, cfg)
    ordered = order_characters(cands, h)
    t2 = time.perf_counter()
    if ordered:
        crops = np.stack(
            [crop_and_normalize(mask, c.bbox, cfg.char_side) for c in ordered]
        )
        prob_rows = probs_batch(model, crops)
        text = "".join(CLASSES[int(i)] for i in prob_rows.argmax(axis=1))
        probs = tuple(prob_rows)
    else:
        text = ""
        probs = ()
    t3 = time.perf_counter()
    return PlateResult(
        text=text,
        boxes=tuple(c.bbox for c in ordered),
        probs=probs,
        timings={
            "detect": 0.0,
            "preprocess": (t1 - t0) * 1000.0,
            "segment": (t2 - t1) * 1000.0,
            "classify": (t3 - t2) * 1000.0,
        },
        source=source,
        unreadable=not text,
    )


def detection_to_source_box(
    det: darknet.Detection,
    src_w: int,
    src_h: int,
    net_w: int,
    net_h: int,
) -> BoundingBox:
    """Undo the letterbox fit: network-normalized box to source pixels."""
    new_w, new_h, off_x, off_y = darknet.letterbox_geometry(
        src_w, src_h, net_w, net_h
    )
    cx, cy, w, h = det.box
    sx = src_w / new_w
    sy = src_h / new_h
    cx_s = (cx * net_w - off_x) * sx
    cy_s = (cy * net_h - off_y) * sy
    w_s = w * net_w * sx
    h_s = h * net_h * sy
    x0 = int(np.floor(cx_s - w_s / 2.0 + 0.5))
    y0 = int(np.floor(cy_s - h_s / 2.0 + 0.5))
    x1 = int(np.floor(cx_s + w_s / 2.0 + 0.5))
    y1 = int(np.floor(cy_s + h_s / 2.0 + 0.5))
    x0 = max(0, min(x0, src_w - 1))
    y0 = max(0, min(y0, src_h - 1))
    x1 = max(x0 + 1, min(x1, src_w))
    y1 = max(y0 + 1, min(y1, src_h))
    return BoundingBox(x0, y0, x1 - x0, y1 - y0)


def process_image(
    img: np.ndarray,
    detector: darknet.Network | None,
    cfg: PipelineConfig,
    model: CharModel,
    source: str = "",
) -> list:
    """Locate plates (or take the whole frame in bypass) and read each one."""
    arr = np.asarray(img)
    gray = _as_gray(arr)
    if detector is None:
        r = recognize_plate(gray, cfg, model, source=source)
        full = BoundingBox(0, 0, gray.shape[1], gray.shape[0])
        return [replace(r, plate_box=full)]

    spec = detector.spec
    t0 = time.perf_counter()
    x = darknet.letterbox(arr, spec.width, spec.height)
    heads = darknet.forward(detector, x)
    yolo_layers = [
        l for l in spec.layers if isinstance(l, darknet.YoloSpec)
    ]
    dets = []
    for out, layer in zip(heads, yolo_layers):
        dets.extend(
            darknet.decode_detections(
                out, layer, spec.width, spec.height, cfg.conf_thresh
            )
        )
    kept = darknet.nms(dets, cfg.nms_iou)
    detect_ms = (time.perf_counter() - t0) * 1000.0

    src_h, src_w = gray.shape
    results = []
    for det in kept:  # nms output is already in descending score order
        box = detection_to_source_box(det, src_w, src_h, spec.width, spec.height)
        crop = gray[box.y:box.y + box.h, box.x:box.x + box.w]
        if box.w < MIN_CROP_W or box.h < MIN_CROP_H:
            r = PlateResult(
                text="",
                boxes=(),
                probs=(),
                timings={
                    "detect": detect_ms,
                    "preprocess": 0.0,
                    "segment": 0.0,
                    "classify": 0.0,
                },
                source=source,
                unreadable=True,
                plate_box=box,
            )
        else:
            r = recognize_plate(crop, cfg, model, source=source)
            r = replace(
                r, timings={**r.timings, "detect": detect_ms}, plate_box=box
            )
        results.append(r)
    return results


def _to_png_array(crop: np.ndarray) -> np.ndarray:
    crop = np.asarray(crop)
    if crop.dtype == bool:
        return np.where(crop, 255, 0).astype(np.uint8)
    if crop.dtype != np.uint8:
        raise ValueError("expected a uint8 or bool image")
    return crop


def persist_result(
    r: PlateResult, crop: np.ndarray, out_dir: str | Path
) -> Path:
    """Save the crop named after its text and log a results.csv row.

    Never overwrites: name collisions get _2, _3, ... via create-exclusive
    opens; unreadable results are numbered UNREAD_1, UNREAD_2, ...
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    arr = _to_png_array(crop)
    n = 1
    while True:
        if r.text:
            name = f"{r.text}.png" if n == 1 else f"{r.text}_{n}.png"
        else:
            name = f"UNREAD_{n}.png"
        path = out / name
        try:
            fh = open(path, "xb")
        except FileExistsError:
            n += 1
            continue
        with fh:
            Image.fromarray(arr).save(fh, format="PNG")
        break
    csv_path = out / "results.csv"
    line = (
        f"{r.source},{name},{r.text},{r.mean_prob:.6f},{r.total_ms:.3f}\n"
    )
    with open(csv_path, "a", encoding="utf-8") as fh:
        if fh.tell() == 0:
            fh.write(RESULTS_CSV_HEADER + "\n")
        fh.write(line)
    return path


def character_accuracy(predicted: str, truth: str) -> float:
    """Longest-common-subsequence overlap as a fraction of the truth."""
    if not truth:
        raise ValueError("truth must be non-empty")
    common = kernels.lcs_len(predicted.encode("ascii"), truth.encode("ascii"))
    return min(1.0, common / len(truth))


@dataclass(frozen=True)
class ReportRow:
    source: str
    predicted: str
    truth: str
    accuracy: float
    seconds: float


@dataclass(frozen=True)
class AccuracyReport:
    rows: tuple
    mean_accuracy: float
    mean_time: float


def evaluate_batch(pairs: list) -> AccuracyReport:
    """Score (source, predicted, truth, seconds) tuples; row order kept."""
    rows = tuple(
        ReportRow(src, pred, truth, character_accuracy(pred, truth), sec)
        for src, pred, truth, sec in pairs
    )
    if rows:
        mean_acc = sum(r.accuracy for r in rows) / len(rows)
        mean_time = sum(r.seconds for r in rows) / len(rows)
    else:
        mean_acc = 0.0
        mean_time = 0.0
    return AccuracyReport(rows=rows, mean_accuracy=mean_acc, mean_time=mean_time)


def render_report(report: AccuracyReport) -> str:
    """Plain-text aligned table, one row per prediction plus the means."""
    header = ("source", "predicted", "truth", "accuracy", "seconds")
    cells = [header]
    for r in report.rows:
        cells.append((
            r.source,
            r.predicted,
            r.truth,
            f"{r.accuracy * 100:.1f}%",
            f"{r.seconds:.3f}",
        ))
    cells.append((
        "mean", "", "",
        f"{report.mean_accuracy * 100:.1f}%",
        f"{report.mean_time:.3f}",
    ))
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = []
    for i, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def report_csv(report: AccuracyReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["source", "predicted", "truth", "accuracy", "seconds"])
    for r in report.rows:
        writer.writerow([
            r.source, r.predicted, r.truth,
            f"{r.accuracy:.6f}", f"{r.seconds:.6f}",
        ])
    return buf.getvalue()
