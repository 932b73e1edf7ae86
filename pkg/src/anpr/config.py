"""Pipeline configuration: one flat dataclass plus a tiny key=value codec.

The file format is deliberately dumb — one `key = value` per line, '#'
comments, commas inside compound values ("canny = 30,130"). Optional bounds
use the literal "none". dump() output re-parses to an equal config.
"""

from dataclasses import dataclass, replace
from typing import Optional

from .errors import ConfigError

__all__ = ["PipelineConfig", "parse_config", "parse_config_text", "dump_config"]


@dataclass(frozen=True)
class PipelineConfig:
    bilateral_diameter: int = 9
    bilateral_sigma_color: float = 70.0
    bilateral_sigma_space: float = 70.0
    canny_low: float = 30.0
    canny_high: float = 130.0
    binarization: str = "otsu"  # otsu | adaptive | canny
    adaptive_block: int = 11
    adaptive_c: float = 2.0
    h_line_kernel: tuple = (10, 1)
    v_line_kernel: tuple = (1, 20)
    h_line_iterations: int = 8
    v_line_iterations: int = 8
    blob_min_size: int = 50
    contour_mode: str = "external"  # external | all
    min_area_frac: Optional[float] = 0.005
    max_area_frac: Optional[float] = 0.20
    min_perimeter_frac: Optional[float] = None
    max_perimeter_frac: Optional[float] = None
    min_aspect: Optional[float] = 0.10
    max_aspect: Optional[float] = 1.20
    min_width_frac: Optional[float] = 0.02
    max_width_frac: Optional[float] = 0.30
    min_height_frac: Optional[float] = 0.35
    max_height_frac: Optional[float] = 0.95
    char_side: int = 32
    conf_thresh: float = 0.5
    nms_iou: float = 0.45

    def validate(self) -> "PipelineConfig":
        if self.bilateral_diameter < 1 or self.bilateral_diameter % 2 == 0:
            raise ConfigError("bilateral diameter must be odd and >= 1")
        if self.bilateral_sigma_color <= 0 or self.bilateral_sigma_space <= 0:
            raise ConfigError("bilateral sigmas must be positive")
        if not (0 <= self.canny_low < self.canny_high):
            raise ConfigError("need 0 <= canny low < high")
        if self.binarization not in ("otsu", "adaptive", "canny"):
            raise ConfigError(f"unknown binarization {self.binarization!r}")
        if self.adaptive_block < 3 or self.adaptive_block % 2 == 0:
            raise ConfigError("adaptive block must be odd and >= 3")
        for name in ("h_line_kernel", "v_line_kernel"):
            kw, kh = getattr(self, name)
            if kw < 1 or kh < 1:
                raise ConfigError(f"{name} must be at least 1x1")
        if self.h_line_iterations < 0 or self.v_line_iterations < 0:
            raise ConfigError("line iterations must be >= 0")
        if self.blob_min_size < 0:
            raise ConfigError("blob_min_size must be >= 0")
        if self.contour_mode not in ("external", "all"):
            raise ConfigError(f"unknown contour_mode {self.contour_mode!r}")
        for lo_name, hi_name in (
            ("min_area_frac", "max_area_frac"),
            ("min_perimeter_frac", "max_perimeter_frac"),
            ("min_aspect", "max_aspect"),
            ("min_width_frac", "max_width_frac"),
            ("min_height_frac", "max_height_frac"),
        ):
            lo = getattr(self, lo_name)
            hi = getattr(self, hi_name)
            if lo is not None and lo < 0:
                raise ConfigError(f"{lo_name} must be >= 0")
            if lo is not None and hi is not None and lo > hi:
                raise ConfigError(f"{lo_name} > {hi_name}")
        if self.char_side < 8:
            raise ConfigError("char_side must be >= 8")
        if not (0.0 <= self.conf_thresh <= 1.0):
            raise ConfigError("conf_thresh must be in [0,1]")
        if not (0.0 <= self.nms_iou <= 1.0):
            raise ConfigError("nms_iou must be in [0,1]")
        return self


# key -> (attribute names, per-part codec). Codecs: i=int, f=float,
# of=optional float ("none" allowed), s=bare string, ii=pair of ints.
_KEYS = {
    "bilateral": (
        ("bilateral_diameter", "bilateral_sigma_color", "bilateral_sigma_space"),
        ("i", "f", "f"),
    ),
    "canny": (("canny_low", "canny_high"), ("f", "f")),
    "binarization": (("binarization",), ("s",)),
    "adaptive": (("adaptive_block", "adaptive_c"), ("i", "f")),
    "h_line_kernel": (("h_line_kernel",), ("ii",)),
    "v_line_kernel": (("v_line_kernel",), ("ii",)),
    "h_line_iterations": (("h_line_iterations",), ("i",)),
    "v_line_iterations": (("v_line_iterations",), ("i",)),
    "blob_min_size": (("blob_min_size",), ("i",)),
    "contour_mode": (("contour_mode",), ("s",)),
    "min_area_frac": (("min_area_frac",), ("of",)),
    "max_area_frac": (("max_area_frac",), ("of",)),
    "min_perimeter_frac": (("min_perimeter_frac",), ("of",)),
    "max_perimeter_frac": (("max_perimeter_frac",), ("of",)),
    "min_aspect": (("min_aspect",), ("of",)),
    "max_aspect": (("max_aspect",), ("of",)),
    "min_width_frac": (("min_width_frac",), ("of",)),
    "max_width_frac": (("max_width_frac",), ("of",)),
    "min_height_frac": (("min_height_frac",), ("of",)),
    "max_height_frac": (("max_height_frac",), ("of",)),
    "char_side": (("char_side",), ("i",)),
    "conf_thresh": (("conf_thresh",), ("f",)),
    "nms_iou": (("nms_iou",), ("f",)),
}


def _parse_part(code: str, text: str, key: str):
    text = text.strip()
    try:
        if code == "i":
            return int(text)
        if code == "f":
            return float(text)
        if code == "of":
            if text.lower() == "none":
                return None
            return float(text)
        if code == "s":
            return text
        if code == "ii":
            a, b = text.split("x") if "x" in text else text.split(",")
            return (int(a), int(b))
    except (ValueError, TypeError):
        pass
    raise ConfigError(f"bad value {text!r} for key {key!r}")


def _format_part(code: str, value) -> str:
    if code == "of":
        return "none" if value is None else repr(float(value))
    if code == "f":
        return repr(float(value))
    if code == "ii":
        return f"{value[0]},{value[1]}"
    return str(value)


def set_key(cfg: PipelineConfig, key: str, value: str) -> PipelineConfig:
    """Apply one `key=value` override (the CLI --set path reuses this)."""
    if key not in _KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    attrs, codes = _KEYS[key]
    if len(attrs) == 1:
        parts = [value]
    else:
        parts = value.split(",")
        if len(parts) != len(attrs):
            raise ConfigError(
                f"key {key!r} needs {len(attrs)} comma-separated values"
            )
    updates = {}
    for attr, code, part in zip(attrs, codes, parts):
        updates[attr] = _parse_part(code, part, key)
    return replace(cfg, **updates)


def parse_config_text(text: str, base: PipelineConfig = None) -> PipelineConfig:
    cfg = base if base is not None else PipelineConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        cfg = set_key(cfg, key.strip(), value.strip())
    return cfg.validate()


def parse_config(path, base: PipelineConfig = None) -> PipelineConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, base)


def dump_config(cfg: PipelineConfig) -> str:
    lines = ["# pipeline tuning parameters"]
    for key, (attrs, codes) in _KEYS.items():
        parts = [
            _format_part(code, getattr(cfg, attr))
            for attr, code in zip(attrs, codes)
        ]
        lines.append(f"{key} = {','.join(parts)}")
    return "\n".join(lines) + "\n"
