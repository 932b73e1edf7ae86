"""Reading and writing image files.

PGM/PBM go through the in-package codec (handy for fixtures and the
dataset tree); everything else (PNG, JPEG, ...) goes through Pillow.
Arrays follow the package conventions: uint8 (h, w) grayscale,
uint8 (h, w, 3) RGB, bool (h, w) binary.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from . import netpbm
from .imgproc import to_grayscale


def read_image(path: str | Path) -> np.ndarray:
    """Load a file as uint8 grayscale (h, w) or RGB (h, w, 3)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        return netpbm.read_pgm(path.read_bytes())
    if suffix == ".pbm":
        # PBM 1-bits are ink: map to dark-on-light grayscale
        mask = netpbm.read_pbm(path.read_bytes())
        return np.where(mask, 0, 255).astype(np.uint8)
    with Image.open(path) as im:
        if im.mode in ("L", "1", "I", "I;16"):
            return np.asarray(im.convert("L"), dtype=np.uint8)
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def read_image_gray(path: str | Path) -> np.ndarray:
    """Load a file and reduce it to uint8 grayscale."""
    img = read_image(path)
    if img.ndim == 3:
        return to_grayscale(img)
    return img


def write_image(path: str | Path, img: np.ndarray) -> None:
    """Store an array; format picked from the file extension."""
    path = Path(path)
    img = np.asarray(img)
    if img.dtype == bool and path.suffix.lower() == ".pbm":
        path.write_bytes(netpbm.write_pbm(img))
        return
    if img.dtype == bool:
        img = np.where(img, 255, 0).astype(np.uint8)
    if img.dtype != np.uint8:
        raise ValueError("expected a uint8 or bool image")
    if path.suffix.lower() == ".pgm":
        if img.ndim != 2:
            raise ValueError("PGM files hold grayscale images")
        path.write_bytes(netpbm.write_pgm(img))
        return
    Image.fromarray(img).save(path)
