"""Sliding-window inference and multi-scale ensembling."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .features import to_model_input
from .model import CnnModel, forward


class WindowError(ValueError):
    """The spectrogram is too short for the model's window."""


def window_count(n_frames: int, d: int, step: int = 1) -> int:
    if n_frames < d:
        return 0
    return (n_frames - d) // step + 1


def sliding_window_predict(model: CnnModel, spec, step: int = 1, batch_size: int = 64) -> np.ndarray:
    """Class probabilities for every ``d``-wide window of ``spec``.

    Parameters
    ----------
    model : CnnModel
    spec : Spectrogram or array_like, shape (T, n_mels)
        Raw mel energies; log compression happens here.
    step : int
        Frames between consecutive window starts. The default of one frame
        yields ``T - d + 1`` windows.

    Returns
    -------
    ndarray, shape (n_windows, n_classes)
    """
    if step < 1:
        raise ValueError("step must be a positive number of frames")
    x = to_model_input(spec)
    d = model.config.d
    T = x.shape[1]
    if x.shape[0] != model.config.n_mels:
        raise ValueError(f"model expects {model.config.n_mels} mel bands, spectrogram has {x.shape[0]}")
    if T < d:
        raise WindowError(f"spectrogram has {T} frames but the model needs d={d}; pad the input or use a smaller-scale model")
    windows = np.lib.stride_tricks.sliding_window_view(x, d, axis=1)[:, ::step]  # (n_mels, n, d)
    windows = windows.transpose(1, 0, 2)
    out = [forward(model, windows[i : i + batch_size]) for i in range(0, len(windows), batch_size)]
    return np.concatenate(out)


def classify_recording(models: Sequence[CnnModel], spec, step: int = 1) -> np.ndarray:
    """Average window probabilities per model, then average across applicable models.

    Models whose window is longer than the spectrogram are skipped; if none
    fits, :class:`WindowError` is raised.
    """
    if not models:
        raise ValueError("need at least one model")
    n_frames = to_model_input(spec).shape[1]
    per_model = [sliding_window_predict(m, spec, step).mean(axis=0) for m in models if m.config.d <= n_frames]
    if not per_model:
        smallest = min(m.config.d for m in models)
        raise WindowError(f"spectrogram has {n_frames} frames, shorter than every model window (smallest d={smallest})")
    p = np.mean(per_model, axis=0)
    return p / p.sum()
