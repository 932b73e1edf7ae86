"""36-class character CNN, built from scratch on numpy.

Architecture: 32x32x1 -> conv 3x3x16 (pad 1) + ReLU -> maxpool 2 ->
conv 3x3x32 (pad 1) + ReLU -> maxpool 2 -> dense 2048x128 + ReLU ->
dense 128x36 -> softmax. Class order is digits then letters.

All training math runs in float64 so the finite-difference gradient tests
can be tight; serialized models are float32.
"""

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ModelFormatError

__all__ = [
    "CLASSES",
    "CharModel",
    "LabeledSample",
    "TrainConfig",
    "Prediction",
    "model_forward",
    "loss_and_gradients",
    "sgd_step",
    "train",
    "save_model",
    "load_model",
    "train_log_csv",
]

CLASSES = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"

_MAGIC = b"ANPRCNN1"


@dataclass(frozen=True)
class LabeledSample:
    image: np.ndarray  # (side, side) float in [0,1]
    label: int


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError("momentum must be in [0,1)")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class Prediction:
    label: str
    probs: np.ndarray


class CharModel:
    """Parameter container. The default shape is the production model;
    the knobs exist so gradient tests can run on a tiny variant."""

    def __init__(self, side=32, conv1=16, conv2=32, hidden=128, n_classes=36,
                 params=None):
        if side % 4 != 0 or side < 8:
            raise ValueError("side must be a multiple of 4, >= 8")
        self.side = side
        self.conv1 = conv1
        self.conv2 = conv2
        self.hidden = hidden
        self.n_classes = n_classes
        self.flat = conv2 * (side // 4) ** 2
        if params is None:
            params = [
                np.zeros((conv1, 1, 3, 3)),
                np.zeros(conv1),
                np.zeros((conv2, conv1, 3, 3)),
                np.zeros(conv2),
                np.zeros((hidden, self.flat)),
                np.zeros(hidden),
                np.zeros((n_classes, hidden)),
                np.zeros(n_classes),
            ]
        self.params = [np.asarray(p, dtype=np.float64) for p in params]
        shapes = self._shapes()
        for p, s in zip(self.params, shapes):
            if p.shape != s:
                raise ValueError(f"parameter shape {p.shape} != expected {s}")

    def _shapes(self):
        return [
            (self.conv1, 1, 3, 3),
            (self.conv1,),
            (self.conv2, self.conv1, 3, 3),
            (self.conv2,),
            (self.hidden, self.flat),
            (self.hidden,),
            (self.n_classes, self.hidden),
            (self.n_classes,),
        ]

    def arch(self):
        return (self.side, self.conv1, self.conv2, self.hidden, self.n_classes)

    def init_weights(self, rng: np.random.Generator) -> "CharModel":
        """He-scaled uniform (sqrt(6/fan_in)) weights, zero biases."""
        new = []
        for p in self.params:
            if p.ndim == 1:
                new.append(np.zeros_like(p))
            else:
                fan_in = int(np.prod(p.shape[1:]))
                limit = np.sqrt(6.0 / fan_in)
                new.append(rng.uniform(-limit, limit, size=p.shape))
        return CharModel(*self.arch(), params=new)

    def copy_with(self, params) -> "CharModel":
        return CharModel(*self.arch(), params=params)


# --------------------------------------------------------------- primitives

def _im2col(x: np.ndarray, k: int, pad: int):
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    oh, ow = win.shape[2], win.shape[3]
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(b, c * k * k, oh * ow)
    return np.ascontiguousarray(cols), oh, ow


def _conv_forward(x, kernel, bias, pad=1):
    b = x.shape[0]
    f, c, k, _ = kernel.shape
    cols, oh, ow = _im2col(x, k, pad)
    flat = cols.transpose(1, 0, 2).reshape(c * k * k, b * oh * ow)
    out = kernel.reshape(f, -1) @ flat
    out = out.reshape(f, b, oh * ow).transpose(1, 0, 2).reshape(b, f, oh, ow)
    out += bias[None, :, None, None]
    return out, cols, (oh, ow)


def _conv_backward(dout, x_shape, cols, kernel, pad=1):
    b, c, h, w = x_shape
    f, _, k, _ = kernel.shape
    oh = dout.shape[2]
    ow = dout.shape[3]
    dflat = dout.reshape(b, f, oh * ow)
    dkernel = np.tensordot(dflat, cols, axes=([0, 2], [0, 2])).reshape(kernel.shape)
    dbias = dout.sum(axis=(0, 2, 3))
    dcols = np.matmul(kernel.reshape(f, -1).T[None], dflat)
    dcols = dcols.reshape(b, c, k, k, oh, ow)
    dxp = np.zeros((b, c, h + 2 * pad, w + 2 * pad))
    for ky in range(k):
        for kx in range(k):
            dxp[:, :, ky : ky + oh, kx : kx + ow] += dcols[:, :, ky, kx]
    dx = dxp[:, :, pad : pad + h, pad : pad + w] if pad else dxp
    return dx, dkernel, dbias


def _pool_forward(x):
    b, c, h, w = x.shape
    blocks = x.reshape(b, c, h // 2, 2, w // 2, 2)
    blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h // 2, w // 2, 4)
    idx = blocks.argmax(axis=-1)  # first max wins
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    return out, idx


def _pool_backward(dout, idx, x_shape):
    b, c, h, w = x_shape
    dblocks = np.zeros((b, c, h // 2, w // 2, 4))
    np.put_along_axis(dblocks, idx[..., None], dout[..., None], axis=-1)
    dblocks = dblocks.reshape(b, c, h // 2, w // 2, 2, 2)
    return dblocks.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h, w)


def _forward_all(model: CharModel, x: np.ndarray):
    """x: (B, 1, side, side). Returns logits plus the cache for backward."""
    w1, b1, w2, b2, w3, b3, w4, b4 = model.params
    z1, cols1, _ = _conv_forward(x, w1, b1)
    a1 = np.maximum(z1, 0.0)
    p1, idx1 = _pool_forward(a1)
    z2, cols2, _ = _conv_forward(p1, w2, b2)
    a2 = np.maximum(z2, 0.0)
    p2, idx2 = _pool_forward(a2)
    flat = p2.reshape(x.shape[0], -1)
    z3 = flat @ w3.T + b3
    a3 = np.maximum(z3, 0.0)
    z4 = a3 @ w4.T + b4
    cache = (x, z1, cols1, a1, idx1, p1, z2, cols2, a2, idx2, p2, flat, z3, a3)
    return z4, cache


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def probs_batch(model: CharModel, images: np.ndarray) -> np.ndarray:
    """(B, side, side) rasters -> (B, n_classes) probabilities."""
    x = np.asarray(images, dtype=np.float64)
    if x.ndim != 3 or x.shape[1:] != (model.side, model.side):
        raise ValueError(f"expected (B, {model.side}, {model.side}) input")
    logits, _ = _forward_all(model, x[:, None, :, :])
    return _softmax(logits)


def model_forward(model: CharModel, image: np.ndarray) -> Prediction:
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (model.side, model.side):
        raise ValueError(
            f"expected ({model.side}, {model.side}) input, got {image.shape}"
        )
    probs = probs_batch(model, image[None])[0]
    label = CLASSES[int(np.argmax(probs))] if model.n_classes == 36 else str(
        int(np.argmax(probs))
    )
    return Prediction(label, probs)


def loss_and_gradients(model: CharModel, batch: list):
    if not batch:
        raise ValueError("batch must be non-empty")
    x = np.stack([np.asarray(s.image, dtype=np.float64) for s in batch])[:, None]
    y = np.array([s.label for s in batch], dtype=np.int64)
    b = x.shape[0]
    logits, cache = _forward_all(model, x)
    (x0, z1, cols1, a1, idx1, p1, z2, cols2, a2, idx2, p2, flat, z3, a3) = cache
    zmax = logits.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(logits - zmax).sum(axis=1))
    loss = float(np.mean(lse - logits[np.arange(b), y]))

    w1, b1_, w2, b2_, w3, b3_, w4, b4_ = model.params
    dlogits = _softmax(logits)
    dlogits[np.arange(b), y] -= 1.0
    dlogits /= b
    dw4 = dlogits.T @ a3
    db4 = dlogits.sum(axis=0)
    da3 = dlogits @ w4
    dz3 = da3 * (z3 > 0)
    dw3 = dz3.T @ flat
    db3 = dz3.sum(axis=0)
    dflat = dz3 @ w3
    dp2 = dflat.reshape(p2.shape)
    da2 = _pool_backward(dp2, idx2, a2.shape)
    dz2 = da2 * (z2 > 0)
    dp1, dw2, db2 = _conv_backward(dz2, p1.shape, cols2, w2)
    da1 = _pool_backward(dp1, idx1, a1.shape)
    dz1 = da1 * (z1 > 0)
    _, dw1, db1 = _conv_backward(dz1, x0.shape, cols1, w1)
    grads = [dw1, db1, dw2, db2, dw3, db3, dw4, db4]
    return loss, grads


def sgd_step(model: CharModel, grads: list, velocity: list, lr: float,
             momentum: float):
    """Momentum update: v <- momentum v - lr g; w <- w + v."""
    new_v = [momentum * v - lr * g for v, g in zip(velocity, grads)]
    new_p = [p + v for p, v in zip(model.params, new_v)]
    return model.copy_with(new_p), new_v


def train(model: CharModel, data: list, cfg: TrainConfig):
    """Initialize and fit; returns (model, per-epoch (epoch, loss, acc) log).

    Deterministic for a fixed seed: init and the per-epoch shuffles all come
    from one seeded generator.
    """
    if not data:
        raise ValueError("no training data")
    rng = np.random.default_rng(cfg.seed)
    model = model.init_weights(rng)
    velocity = [np.zeros_like(p) for p in model.params]
    n = len(data)
    images = np.stack([np.asarray(s.image, dtype=np.float64) for s in data])
    labels = np.array([s.label for s in data], dtype=np.int64)
    log = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            take = perm[start : start + cfg.batch_size]
            batch = [LabeledSample(images[i], int(labels[i])) for i in take]
            loss, grads = loss_and_gradients(model, batch)
            model, velocity = sgd_step(
                model, grads, velocity, cfg.learning_rate, cfg.momentum
            )
            losses.append(loss)
        probs = probs_batch(model, images)
        acc = float(np.mean(probs.argmax(axis=1) == labels))
        log.append((epoch, float(np.mean(losses)), acc))
    return model, log


def train_log_csv(log: list) -> str:
    lines = ["epoch,loss,accuracy"]
    for epoch, loss, acc in log:
        lines.append(f"{epoch},{loss:.6f},{acc:.6f}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------- serialization

def _arch_hash(arch) -> bytes:
    text = "side={},conv1={},conv2={},hidden={},classes={}".format(*arch)
    return hashlib.sha256(text.encode()).digest()[:8]


def save_model(model: CharModel) -> bytes:
    head = _MAGIC + struct.pack("<5I", *model.arch()) + _arch_hash(model.arch())
    blobs = b"".join(
        np.asarray(p, dtype="<f4").tobytes() for p in model.params
    )
    return head + blobs


def load_model(blob: bytes) -> CharModel:
    if len(blob) < len(_MAGIC) + 20 + 8:
        raise ModelFormatError("model stream too short")
    if blob[: len(_MAGIC)] != _MAGIC:
        raise ModelFormatError("bad magic")
    off = len(_MAGIC)
    arch = struct.unpack_from("<5I", blob, off)
    off += 20
    stored = blob[off : off + 8]
    off += 8
    if stored != _arch_hash(arch):
        raise ModelFormatError("architecture hash mismatch")
    try:
        template = CharModel(*arch)
    except ValueError as exc:
        raise ModelFormatError(f"bad architecture: {exc}") from exc
    params = []
    for shape in template._shapes():
        count = int(np.prod(shape))
        nbytes = 4 * count
        if off + nbytes > len(blob):
            raise ModelFormatError("model stream truncated")
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=off)
        params.append(arr.astype(np.float64).reshape(shape))
        off += nbytes
    if off != len(blob):
        raise ModelFormatError("trailing bytes after parameters")
    return template.copy_with(params)
