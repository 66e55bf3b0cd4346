"""Minibatch training with Adam, plus a finite-difference gradient check."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .features import to_model_input
from .model import CnnModel, cross_entropy, forward, loss_and_grads

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch: int = 32
    epochs: int = 30
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    steps_per_epoch: Optional[int] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    model: CnnModel
    loss_history: list = field(default_factory=list)
    excluded: list = field(default_factory=list)


class Adam:
    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        if self.lr == 0:
            self.t += 1
            return
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            params[k] -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(params[k].dtype)


def _prepare(model, recordings):
    d = model.config.d
    inputs, labels, excluded = [], [], []
    for i, (spec, label) in enumerate(recordings):
        x = to_model_input(spec)
        if x.shape[1] < d:
            excluded.append(i)
            log.warning("recording %d has %d frames, fewer than d=%d; excluded from training", i, x.shape[1], d)
            continue
        inputs.append(x.astype(model.dtype))
        labels.append(int(label))
    missing = sorted(set(range(model.config.n_classes)) - set(labels))
    if missing:
        raise ValueError(f"no usable training recordings for class(es) {missing}")
    return inputs, np.array(labels), excluded


def train(
    model: CnnModel,
    recordings: Sequence,
    config: TrainConfig = TrainConfig(),
    on_epoch: Optional[Callable[[int, float], None]] = None,
) -> TrainResult:
    """Fit ``model`` in place on ``(spectrogram, label)`` pairs.

    Each step draws a batch of recordings and one random ``d``-wide window
    from each. An epoch is ``ceil(n / batch)`` steps unless
    ``steps_per_epoch`` is set. The mean batch loss for each epoch is
    recorded in ``loss_history``.
    """
    inputs, labels, excluded = _prepare(model, recordings)
    rng = np.random.default_rng(config.seed)
    opt = Adam(model.params, config.lr, config.beta1, config.beta2, config.eps)
    d = model.config.d
    n = len(inputs)
    steps = config.steps_per_epoch or -(-n // config.batch)
    result = TrainResult(model, [], excluded)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for s in range(steps):
            idx = order[(np.arange(config.batch) + s * config.batch) % n]
            batch = np.empty((len(idx), model.config.n_mels, d), dtype=model.dtype)
            for j, i in enumerate(idx):
                start = rng.integers(0, inputs[i].shape[1] - d + 1)
                batch[j] = inputs[i][:, start : start + d]
            loss, grads, _ = loss_and_grads(model, batch, labels[idx], train_mode=True, rng=rng)
            opt.step(model.params, grads)
            losses.append(loss)
        result.loss_history.append(float(np.mean(losses)))
        if on_epoch:
            on_epoch(epoch, result.loss_history[-1])
    return result


def gradient_check(model: CnnModel, sample, label, eps: float = 1e-4, masks=None, floor: float = 1e-8) -> float:
    """Largest relative gap between backprop and central-difference gradients.

    The comparison runs on a float64 copy of ``model``. ``sample`` is one
    ``(n_mels, d)`` patch or a batch of them with matching ``label``(s).
    With ``masks`` (one dropout multiplier per block) the check runs in
    training mode under those fixed masks; otherwise dropout is off.
    Relative error is ``|a - n| / max(|a|, |n|, floor)``.
    """
    m = model.copy(np.float64)
    x = np.asarray(sample, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    y = np.atleast_1d(np.asarray(label))
    train_mode = masks is not None
    if train_mode:
        masks = [None if mk is None else np.asarray(mk, dtype=np.float64) for mk in masks]

    def loss():
        return cross_entropy(forward(m, x, train_mode, masks=masks), y)

    _, grads, _ = loss_and_grads(m, x, y, train_mode, masks=masks)
    worst = 0.0
    for name, p in m.params.items():
        flat = p.reshape(-1)
        g = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss()
            flat[i] = orig - eps
            down = loss()
            flat[i] = orig
            num = (up - down) / (2 * eps)
            err = abs(g[i] - num) / max(abs(g[i]), abs(num), floor)
            worst = max(worst, err)
    return worst
