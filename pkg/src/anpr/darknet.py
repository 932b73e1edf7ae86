"""Reader and CPU forward pass for Darknet-style detector files.

Covers the subset of the format a single-class plate detector needs:
convolutional / shortcut / route / upsample / yolo layers, batch-norm
folding at load time, logistic box decoding and greedy NMS. Parsing is
strict: unknown sections fail, unknown keys inside known sections are
collected as warnings, and the weight stream must be consumed exactly.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CfgParseError, WeightsError
from .imgproc import resize_bilinear

__all__ = [
    "ConvSpec",
    "ShortcutSpec",
    "RouteSpec",
    "UpsampleSpec",
    "YoloSpec",
    "NetworkSpec",
    "Network",
    "Detection",
    "parse_cfg",
    "render_cfg",
    "load_weights",
    "forward",
    "decode_detections",
    "nms",
    "letterbox",
    "letterbox_geometry",
]


@dataclass(frozen=True)
class ConvSpec:
    filters: int
    size: int
    stride: int
    pad: bool
    batch_normalize: bool
    activation: str  # "linear" | "leaky"


@dataclass(frozen=True)
class ShortcutSpec:
    from_layer: int  # absolute index, strictly earlier


@dataclass(frozen=True)
class RouteSpec:
    layers: tuple  # absolute indices, strictly earlier


@dataclass(frozen=True)
class UpsampleSpec:
    stride: int


@dataclass(frozen=True)
class YoloSpec:
    mask: tuple
    anchors: tuple  # ((w, h), ...)
    classes: int


@dataclass(frozen=True)
class NetworkSpec:
    channels: int
    height: int
    width: int
    layers: tuple
    warnings: tuple = field(default=(), compare=False)


@dataclass(frozen=True)
class Detection:
    box: tuple  # (cx, cy, w, h), normalized
    score: float
    class_id: int


class Network:
    """Parsed spec plus folded per-layer parameters. Immutable after load."""

    def __init__(self, spec: NetworkSpec, params: list):
        self.spec = spec
        self.params = tuple(params)


# ------------------------------------------------------------------- parsing

_REQUIRED_NET_KEYS = ("width", "height", "channels")


def _split_sections(text: str):
    sections = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise CfgParseError(f"line {lineno}: malformed section header {raw!r}")
            current = (line[1:-1].strip().lower(), {})
            sections.append(current)
            continue
        if current is None:
            raise CfgParseError(f"line {lineno}: key before any section")
        if "=" not in line:
            raise CfgParseError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        current[1][key.strip().lower()] = value.strip()
    return sections


def _get_int(opts, key, default=None, section="?"):
    if key not in opts:
        if default is None:
            raise CfgParseError(f"[{section}] missing required key {key!r}")
        return default
    try:
        return int(opts.pop(key))
    except ValueError:
        raise CfgParseError(f"[{section}] bad integer for {key!r}") from None


def _int_list(opts, key, section):
    if key not in opts:
        raise CfgParseError(f"[{section}] missing required key {key!r}")
    raw = opts.pop(key)
    try:
        return [int(v.strip()) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise CfgParseError(f"[{section}] bad integer list for {key!r}") from None


def _resolve(ref: int, layer_index: int, section: str) -> int:
    absolute = ref if ref >= 0 else layer_index + ref
    if not (0 <= absolute < layer_index):
        raise CfgParseError(
            f"[{section}] reference {ref} at layer {layer_index} "
            "does not point to an earlier layer"
        )
    return absolute


def parse_cfg(text: str) -> NetworkSpec:
    sections = _split_sections(text)
    if not sections:
        raise CfgParseError("empty network description")
    head_name, head = sections[0]
    if head_name not in ("net", "network"):
        raise CfgParseError(f"first section must be the net header, got [{head_name}]")
    for key in _REQUIRED_NET_KEYS:
        if key not in head:
            raise CfgParseError(f"net header missing {key!r}")
    channels = _get_int(head, "channels", section="net")
    height = _get_int(head, "height", section="net")
    width = _get_int(head, "width", section="net")
    if min(channels, height, width) < 1:
        raise CfgParseError("net dimensions must be >= 1")
    warnings = [f"[net] ignoring key {k!r}" for k in head]

    layers = []
    for name, opts in sections[1:]:
        idx = len(layers)
        if name == "convolutional":
            filters = _get_int(opts, "filters", 1, name)
            size = _get_int(opts, "size", 1, name)
            stride = _get_int(opts, "stride", 1, name)
            pad = _get_int(opts, "pad", 0, name)
            bn = _get_int(opts, "batch_normalize", 0, name)
            activation = opts.pop("activation", "linear")
            if activation not in ("linear", "leaky"):
                raise CfgParseError(
                    f"[convolutional] unsupported activation {activation!r}"
                )
            if min(filters, size, stride) < 1:
                raise CfgParseError("[convolutional] dims must be >= 1")
            layers.append(
                ConvSpec(filters, size, stride, bool(pad), bool(bn), activation)
            )
        elif name == "shortcut":
            if "from" not in opts:
                raise CfgParseError("[shortcut] missing required key 'from'")
            ref = _get_int(opts, "from", section=name)
            act = opts.pop("activation", "linear")
            if act != "linear":
                warnings.append(f"[shortcut] ignoring activation {act!r}")
            layers.append(ShortcutSpec(_resolve(ref, idx, name)))
        elif name == "route":
            refs = _int_list(opts, "layers", name)
            if not refs:
                raise CfgParseError("[route] empty layer list")
            layers.append(RouteSpec(tuple(_resolve(r, idx, name) for r in refs)))
        elif name == "upsample":
            stride = _get_int(opts, "stride", 2, name)
            if stride < 1:
                raise CfgParseError("[upsample] stride must be >= 1")
            layers.append(UpsampleSpec(stride))
        elif name == "yolo":
            mask = _int_list(opts, "mask", name)
            flat = opts.pop("anchors", None)
            if flat is None:
                raise CfgParseError("[yolo] missing required key 'anchors'")
            try:
                nums = [float(v.strip()) for v in flat.split(",") if v.strip()]
            except ValueError:
                raise CfgParseError("[yolo] bad anchors list") from None
            if len(nums) % 2:
                raise CfgParseError("[yolo] anchors must come in (w,h) pairs")
            anchors = tuple((nums[i], nums[i + 1]) for i in range(0, len(nums), 2))
            classes = _get_int(opts, "classes", section=name)
            if classes < 1:
                raise CfgParseError("[yolo] classes must be >= 1")
            if not mask:
                raise CfgParseError("[yolo] empty mask")
            for m in mask:
                if not (0 <= m < len(anchors)):
                    raise CfgParseError(f"[yolo] mask index {m} outside anchors")
            layers.append(YoloSpec(tuple(mask), anchors, classes))
        else:
            raise CfgParseError(f"unknown section [{name}]")
        for key in opts:
            warnings.append(f"[{name}] ignoring key {key!r}")
    return NetworkSpec(channels, height, width, tuple(layers), tuple(warnings))


def render_cfg(spec: NetworkSpec) -> str:
    """Serialize a spec back to cfg text (test fixture helper)."""
    out = [
        "[net]",
        f"width={spec.width}",
        f"height={spec.height}",
        f"channels={spec.channels}",
    ]
    for layer in spec.layers:
        if isinstance(layer, ConvSpec):
            out += [
                "",
                "[convolutional]",
                f"batch_normalize={int(layer.batch_normalize)}",
                f"filters={layer.filters}",
                f"size={layer.size}",
                f"stride={layer.stride}",
                f"pad={int(layer.pad)}",
                f"activation={layer.activation}",
            ]
        elif isinstance(layer, ShortcutSpec):
            out += ["", "[shortcut]", f"from={layer.from_layer}"]
        elif isinstance(layer, RouteSpec):
            refs = ",".join(str(r) for r in layer.layers)
            out += ["", "[route]", f"layers={refs}"]
        elif isinstance(layer, UpsampleSpec):
            out += ["", "[upsample]", f"stride={layer.stride}"]
        elif isinstance(layer, YoloSpec):
            mask = ",".join(str(m) for m in layer.mask)
            flat = ",".join(
                f"{v:g}" for pair in layer.anchors for v in pair
            )
            out += [
                "",
                "[yolo]",
                f"mask={mask}",
                f"anchors={flat}",
                f"classes={layer.classes}",
            ]
        else:  # pragma: no cover - spec construction guards this
            raise CfgParseError(f"cannot render layer {layer!r}")
    return "\n".join(out) + "\n"


def _channel_walk(spec: NetworkSpec):
    """Input/output channel count per layer (weight sizing + route checks)."""
    outs = []
    for i, layer in enumerate(spec.layers):
        prev = outs[i - 1] if i else spec.channels
        if isinstance(layer, ConvSpec):
            outs.append(layer.filters)
        elif isinstance(layer, ShortcutSpec):
            outs.append(prev)
        elif isinstance(layer, RouteSpec):
            outs.append(sum(outs[r] for r in layer.layers))
        else:
            outs.append(prev)
    ins = [outs[i - 1] if i else spec.channels for i in range(len(spec.layers))]
    # route replaces the sequential input entirely
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, RouteSpec):
            ins[i] = sum(outs[r] for r in layer.layers)
    return ins, outs


# ------------------------------------------------------------------- weights

_BN_EPS = 1e-6


def load_weights(spec: NetworkSpec, blob: bytes) -> Network:
    if len(blob) < 12:
        raise WeightsError("stream shorter than the header")
    major, minor, _revision = struct.unpack_from("<iii", blob, 0)
    pos = 12
    if major * 10 + minor >= 2:
        if len(blob) < pos + 8:
            raise WeightsError("stream truncated in the seen counter")
        pos += 8
    else:
        if len(blob) < pos + 4:
            raise WeightsError("stream truncated in the seen counter")
        pos += 4

    def take(count: int, what: str) -> np.ndarray:
        nonlocal pos
        nbytes = 4 * count
        if pos + nbytes > len(blob):
            raise WeightsError(
                f"stream truncated reading {what} "
                f"(need {nbytes} bytes at offset {pos}, have {len(blob) - pos})"
            )
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=pos)
        pos += nbytes
        return arr.astype(np.float64)

    ins, _outs = _channel_walk(spec)
    params = []
    for i, layer in enumerate(spec.layers):
        if not isinstance(layer, ConvSpec):
            params.append(None)
            continue
        n, c, k = layer.filters, ins[i], layer.size
        if layer.batch_normalize:
            shift = take(n, f"layer {i} bn shift")
            scale = take(n, f"layer {i} bn scale")
            mean = take(n, f"layer {i} bn mean")
            var = take(n, f"layer {i} bn variance")
            kernel = take(n * c * k * k, f"layer {i} kernel")
            factor = scale / np.sqrt(var + _BN_EPS)
            bias = shift - factor * mean
            kernel = kernel.reshape(n, c, k, k) * factor[:, None, None, None]
        else:
            bias = take(n, f"layer {i} bias")
            kernel = take(n * c * k * k, f"layer {i} kernel").reshape(n, c, k, k)
        if not (np.isfinite(kernel).all() and np.isfinite(bias).all()):
            raise WeightsError(f"layer {i} has non-finite weights")
        params.append({"kernel": kernel, "bias": bias})
    if pos != len(blob):
        raise WeightsError(f"{len(blob) - pos} trailing bytes after the last layer")
    return Network(spec, params)


# ------------------------------------------------------------------- forward

def _conv2d(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, stride: int,
            pad: int) -> np.ndarray:
    c, h, w = x.shape
    n, kc, k, _ = kernel.shape
    if kc != c:
        raise ValueError(f"conv expects {kc} channels, tensor has {c}")
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    oh = (x.shape[1] - k) // stride + 1
    ow = (x.shape[2] - k) // stride + 1
    if oh < 1 or ow < 1:
        raise ValueError("tensor smaller than the kernel")
    win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))
    win = win[:, ::stride, ::stride]  # (c, oh, ow, k, k)
    cols = win.transpose(0, 3, 4, 1, 2).reshape(c * k * k, oh * ow)
    out = kernel.reshape(n, c * k * k) @ cols + bias[:, None]
    return out.reshape(n, oh, ow)


def forward(net: Network, x: np.ndarray) -> list:
    """Run the network; returns the yolo layers' raw output tensors.

    A network without any yolo layer yields the last layer's output as the
    single list element (useful for toy fixtures).
    """
    spec = net.spec
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.channels, spec.height, spec.width):
        raise ValueError(
            f"input shape {x.shape} does not match "
            f"{(spec.channels, spec.height, spec.width)}"
        )
    outputs = []
    heads = []
    cur = x
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, ConvSpec):
            p = net.params[i]
            pad = layer.size // 2 if layer.pad else 0
            cur = _conv2d(cur, p["kernel"], p["bias"], layer.stride, pad)
            if layer.activation == "leaky":
                cur = np.maximum(cur, 0.1 * cur)
        elif isinstance(layer, ShortcutSpec):
            ref = outputs[layer.from_layer]
            if ref.shape != cur.shape:
                raise ValueError(
                    f"shortcut at layer {i}: shape {ref.shape} vs {cur.shape}"
                )
            cur = cur + ref
        elif isinstance(layer, RouteSpec):
            parts = [outputs[r] for r in layer.layers]
            hw = {p.shape[1:] for p in parts}
            if len(hw) != 1:
                raise ValueError(f"route at layer {i}: mismatched spatial dims")
            cur = np.concatenate(parts, axis=0)
        elif isinstance(layer, UpsampleSpec):
            s = layer.stride
            cur = np.repeat(np.repeat(cur, s, axis=1), s, axis=2)
        elif isinstance(layer, YoloSpec):
            heads.append(cur)
        outputs.append(cur)
    return heads if heads else [outputs[-1]]


# -------------------------------------------------------------- detections

def _sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def decode_detections(
    yolo_out: np.ndarray,
    layer: YoloSpec,
    net_w: int,
    net_h: int,
    conf_thresh: float = 0.5,
) -> list:
    c, gh, gw = yolo_out.shape
    per = 5 + layer.classes
    if c != len(layer.mask) * per:
        raise ValueError(
            f"yolo tensor has {c} channels, expected {len(layer.mask) * per}"
        )
    dets = []
    grid = yolo_out.reshape(len(layer.mask), per, gh, gw)
    for a, anchor_idx in enumerate(layer.mask):
        pw, ph = layer.anchors[anchor_idx]
        tx, ty, tw, th, tobj = grid[a, 0], grid[a, 1], grid[a, 2], grid[a, 3], grid[a, 4]
        obj = _sigmoid(tobj)
        cls = _sigmoid(grid[a, 5:])
        bx = (_sigmoid(tx) + np.arange(gw)[None, :]) / gw
        by = (_sigmoid(ty) + np.arange(gh)[:, None]) / gh
        bw = pw * np.exp(tw) / net_w
        bh = ph * np.exp(th) / net_h
        for ci in range(layer.classes):
            score = obj * cls[ci]
            ii, jj = np.nonzero(score >= conf_thresh)
            for i, j in zip(ii, jj):
                dets.append(
                    Detection(
                        (float(bx[i, j]), float(by[i, j]),
                         float(bw[i, j]), float(bh[i, j])),
                        float(score[i, j]),
                        ci,
                    )
                )
    return dets


def _iou(a, b) -> float:
    ax0, ay0 = a[0] - a[2] / 2, a[1] - a[3] / 2
    ax1, ay1 = a[0] + a[2] / 2, a[1] + a[3] / 2
    bx0, by0 = b[0] - b[2] / 2, b[1] - b[3] / 2
    bx1, by1 = b[0] + b[2] / 2, b[1] + b[3] / 2
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    if union <= 0:
        return 0.0
    return inter / union


def nms(dets: list, iou_thresh: float = 0.45) -> list:
    """Greedy same-class suppression; strictly-greater IoU discards."""
    if not (0.0 <= iou_thresh <= 1.0):
        raise ValueError("iou_thresh must be in [0,1]")
    pending = sorted(
        dets,
        key=lambda d: (-d.score, d.box[0], d.box[1], d.box[2], d.box[3], d.class_id),
    )
    kept = []
    while pending:
        best = pending.pop(0)
        kept.append(best)
        pending = [
            d
            for d in pending
            if d.class_id != best.class_id or _iou(d.box, best.box) <= iou_thresh
        ]
    return kept


# -------------------------------------------------------------- letterboxing

def letterbox_geometry(src_w: int, src_h: int, net_w: int, net_h: int):
    """Content size and offsets of the aspect-preserving fit."""
    scale = min(net_w / src_w, net_h / src_h)
    new_w = max(1, int(np.floor(src_w * scale + 0.5)))
    new_h = max(1, int(np.floor(src_h * scale + 0.5)))
    off_x = (net_w - new_w) // 2
    off_y = (net_h - new_h) // 2
    return new_w, new_h, off_x, off_y


def letterbox(img: np.ndarray, net_w: int, net_h: int) -> np.ndarray:
    """Fit an image into (net_h, net_w) on a 0.5 canvas, values in [0,1].

    Returns a (3, net_h, net_w) float64 tensor, RGB order; grayscale input
    is replicated across channels.
    """
    img = np.asarray(img)
    if img.ndim == 2:
        channels = [img, img, img]
    elif img.ndim == 3 and img.shape[2] == 3:
        channels = [img[:, :, i] for i in range(3)]
    else:
        raise ValueError("expected (H, W) or (H, W, 3) uint8 image")
    h, w = channels[0].shape
    new_w, new_h, off_x, off_y = letterbox_geometry(w, h, net_w, net_h)
    out = np.full((3, net_h, net_w), 0.5, dtype=np.float64)
    for i, ch in enumerate(channels):
        scaled = resize_bilinear(np.ascontiguousarray(ch), new_w, new_h)
        out[i, off_y : off_y + new_h, off_x : off_x + new_w] = scaled / 255.0
    return out
