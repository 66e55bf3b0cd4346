"""Stacked-block 2-D CNN over mel-spectrogram patches, forward and backward in numpy.

Layout is NHWC: a batch of patches has shape ``(N, n_mels, d, channels)``.
Each block applies ``l`` same-padded 3x3 ReLU convolutions, a 2x2 max pool
and dropout; the last block is flattened into a dense softmax layer.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

CLASSES = ("cough", "breath", "voice")


class ModelConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    d : window width in frames; b : number of blocks; l : convolutions per
    block; k : kernels per convolution.
    """

    d: int = 128
    b: int = 3
    l: int = 1
    k: int = 64
    dropout_p: float = 0.5
    n_mels: int = 128
    n_classes: int = len(CLASSES)

    def check(self, strict: bool = True) -> "ModelConfig":
        """Raise :class:`ModelConfigError` unless the config is buildable.

        ``strict`` additionally enforces the published search ranges:
        ``d`` in [128, 1024], ``l`` in [1, 3], ``k`` in [64, 128] and
        ``b`` in [3, log2(d)]. Non-strict configs (tiny test models, a
        dense-only ``b = 0`` model) only need consistent shapes.
        """
        ints = (self.d, self.b, self.l, self.k, self.n_mels, self.n_classes)
        if any(not isinstance(v, (int, np.integer)) for v in ints):
            raise ModelConfigError("architecture sizes must be integers")
        if self.d < 1 or self.b < 0 or self.l < 1 or self.k < 1 or self.n_classes < 2:
            raise ModelConfigError(f"non-positive size in {self}")
        if not 0 <= self.dropout_p < 1:
            raise ModelConfigError("dropout_p must lie in [0, 1)")
        scale = 2**self.b
        if self.d % scale or self.n_mels % scale:
            raise ModelConfigError(f"n_mels={self.n_mels} and d={self.d} must be divisible by 2**b={scale}")
        if strict:
            if not 128 <= self.d <= 1024:
                raise ModelConfigError(f"d={self.d} outside [128, 1024]")
            if not 1 <= self.l <= 3:
                raise ModelConfigError(f"l={self.l} outside [1, 3]")
            if not 64 <= self.k <= 128:
                raise ModelConfigError(f"k={self.k} outside [64, 128]")
            if not 3 <= self.b <= math.log2(self.d):
                raise ModelConfigError(f"b={self.b} outside [3, log2(d)]")
            if self.n_mels != 128 or self.n_classes != len(CLASSES):
                raise ModelConfigError("published models take 128 mel bands and emit 3 classes")
        return self

    @property
    def n_convs(self) -> int:
        return self.b * self.l

    @property
    def flat_features(self) -> int:
        scale = 2**self.b
        channels = self.k if self.b else 1
        return (self.n_mels // scale) * (self.d // scale) * channels

    def to_dict(self) -> dict:
        return asdict(self)


def closed_form_parameter_count(config: ModelConfig) -> int:
    """Trainable parameters implied by the architecture, without building it."""
    c = config
    dense = c.flat_features * c.n_classes + c.n_classes
    if c.b == 0:
        return dense
    first = 9 * 1 * c.k + c.k
    rest = (c.n_convs - 1) * (9 * c.k * c.k + c.k)
    return first + rest + dense


class CnnModel:
    """Parameters plus config; ``params`` maps names to arrays in layer order."""

    def __init__(self, config: ModelConfig, params: dict):
        self.config = config
        self.params = params

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def conv_names(self):
        return [(f"block{i}.conv{j}.weight", f"block{i}.conv{j}.bias") for i in range(self.config.b) for j in range(self.config.l)]

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def copy(self, dtype=None) -> "CnnModel":
        dtype = dtype or self.dtype
        return CnnModel(self.config, {k: v.astype(dtype, copy=True) for k, v in self.params.items()})

    def __repr__(self):
        return f"CnnModel({self.config}, params={self.parameter_count()})"


def build_model(config: ModelConfig, seed: int = 0, strict: bool = True, dtype=np.float32) -> CnnModel:
    """He-initialized weights and zero biases, drawn from ``default_rng(seed)``."""
    config.check(strict)
    rng = np.random.default_rng(seed)
    params = {}
    channels = 1
    for i in range(config.b):
        for j in range(config.l):
            std = math.sqrt(2.0 / (9 * channels))
            params[f"block{i}.conv{j}.weight"] = (rng.standard_normal((3, 3, channels, config.k)) * std).astype(dtype)
            params[f"block{i}.conv{j}.bias"] = np.zeros(config.k, dtype=dtype)
            channels = config.k
    F = config.flat_features
    params["dense.weight"] = (rng.standard_normal((F, config.n_classes)) * math.sqrt(2.0 / F)).astype(dtype)
    params["dense.bias"] = np.zeros(config.n_classes, dtype=dtype)
    return CnnModel(config, params)


# --- layers ---------------------------------------------------------------------


def conv3x3_forward(x, w, b):
    """Same-padded 3x3 convolution as nine shifted matrix products."""
    N, H, W, _ = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    out = np.empty((N, H, W, w.shape[-1]), dtype=x.dtype)
    out[...] = b
    for dy in range(3):
        for dx in range(3):
            out += xp[:, dy : dy + H, dx : dx + W, :] @ w[dy, dx]
    return out, xp


def conv3x3_backward(dout, xp, w):
    N, H, W, K = dout.shape
    C = xp.shape[-1]
    dw = np.empty_like(w)
    dxp = np.zeros_like(xp)
    flat = dout.reshape(-1, K)
    for dy in range(3):
        for dx in range(3):
            win = xp[:, dy : dy + H, dx : dx + W, :]
            dw[dy, dx] = win.reshape(-1, C).T @ flat
            dxp[:, dy : dy + H, dx : dx + W, :] += dout @ w[dy, dx].T
    db = flat.sum(axis=0)
    return dxp[:, 1:-1, 1:-1, :], dw, db


def maxpool_forward(x):
    N, H, W, C = x.shape
    win = x.reshape(N, H // 2, 2, W // 2, 2, C).transpose(0, 1, 3, 5, 2, 4).reshape(N, H // 2, W // 2, C, 4)
    idx = np.argmax(win, axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool_backward(dout, idx, shape):
    N, H, W, C = shape
    dwin = np.zeros(dout.shape + (4,), dtype=dout.dtype)
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
    return dwin.reshape(N, H // 2, W // 2, C, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(N, H, W, C)


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def dropout_mask(rng, shape, p, dtype):
    """Inverted-dropout multiplier: 0 with probability ``p``, else ``1 / (1 - p)``."""
    if p == 0:
        return None
    keep = rng.random(shape) >= p
    return (keep / (1.0 - p)).astype(dtype)


def _as_batch(model: CnnModel, x) -> np.ndarray:
    c = model.config
    x = np.asarray(x, dtype=model.dtype)
    if x.ndim == 2:
        x = x[None]
    if x.ndim == 3:
        x = x[..., None]
    if x.shape[1:] != (c.n_mels, c.d, 1):
        raise ValueError(f"expected patches of shape ({c.n_mels}, {c.d}), got {x.shape[1:3]}")
    return x


def forward(
    model: CnnModel,
    x,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
    masks: Optional[list] = None,
    return_cache: bool = False,
):
    """Class probabilities for one patch ``(n_mels, d)`` or a batch ``(N, n_mels, d)``.

    Dropout is applied only in ``train_mode``; masks come from ``rng`` unless
    given explicitly (one multiplier array per block, ``None`` to skip).
    Probabilities are returned in float64, shape ``(N, n_classes)``.
    """
    x = _as_batch(model, x)
    cfg = model.config
    if train_mode and masks is None:
        rng = rng if rng is not None else np.random.default_rng()
    cache = {"blocks": [], "masks": []}
    h = x
    names = model.conv_names()
    for i in range(cfg.b):
        convs = []
        for j in range(cfg.l):
            wname, bname = names[i * cfg.l + j]
            z, xp = conv3x3_forward(h, model.params[wname], model.params[bname])
            h = np.maximum(z, 0)
            convs.append((xp, z > 0))
        pre_pool_shape = h.shape
        h, idx = maxpool_forward(h)
        mask = None
        if train_mode:
            if masks is not None:
                mask = masks[i]
            else:
                mask = dropout_mask(rng, h.shape, cfg.dropout_p, h.dtype)
            if mask is not None:
                h = h * mask
        cache["blocks"].append((convs, idx, pre_pool_shape))
        cache["masks"].append(mask)
    flat = h.reshape(h.shape[0], -1)
    logits = flat @ model.params["dense.weight"] + model.params["dense.bias"]
    probs = softmax(logits.astype(np.float64))
    if return_cache:
        cache["flat"] = flat
        cache["pooled_shape"] = h.shape
        return probs, cache
    return probs


def cross_entropy(probs, labels) -> float:
    labels = np.asarray(labels)
    p = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(p, 1e-300))))


def backward(model: CnnModel, probs, labels, cache) -> dict:
    """Gradients of the mean cross-entropy with respect to every parameter."""
    cfg = model.config
    labels = np.asarray(labels)
    N = len(labels)
    dlogits = probs.copy()
    dlogits[np.arange(N), labels] -= 1.0
    dlogits = (dlogits / N).astype(model.dtype)

    grads = {}
    flat = cache["flat"]
    grads["dense.weight"] = flat.T @ dlogits
    grads["dense.bias"] = dlogits.sum(axis=0)
    dh = (dlogits @ model.params["dense.weight"].T).reshape(cache["pooled_shape"])

    names = model.conv_names()
    for i in reversed(range(cfg.b)):
        convs, idx, pre_pool_shape = cache["blocks"][i]
        mask = cache["masks"][i]
        if mask is not None:
            dh = dh * mask
        dh = maxpool_backward(dh, idx, pre_pool_shape)
        for j in reversed(range(cfg.l)):
            wname, bname = names[i * cfg.l + j]
            xp, active = convs[j]
            dz = dh * active
            dh, grads[wname], grads[bname] = conv3x3_backward(dz, xp, model.params[wname])
    return {k: grads[k] for k in model.params}


def loss_and_grads(model, x, labels, train_mode=False, rng=None, masks=None):
    probs, cache = forward(model, x, train_mode, rng, masks, return_cache=True)
    return cross_entropy(probs, labels), backward(model, probs, labels, cache), probs
