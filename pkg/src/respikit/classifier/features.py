"""Recording preprocessing shared by training and inference."""

from __future__ import annotations

import numpy as np

from .. import dsp

FLOOR_DB = -80.0


def preprocess(buf: dsp.AudioBuffer, trim_db: float = dsp.TRIM_DB) -> dsp.Spectrogram:
    """Peak-normalize, trim leading/trailing silence and take the mel spectrogram.

    Raises :class:`respikit.dsp.EmptyAudioError` when nothing survives trimming
    or the remainder is shorter than one STFT frame.
    """
    trimmed = dsp.trim_silence(dsp.normalize(buf), trim_db)
    if trimmed.empty or len(trimmed.buffer) < dsp.FFT_SIZE:
        raise dsp.EmptyAudioError("recording is silent or shorter than one analysis frame after trimming")
    return dsp.mel_spectrogram(trimmed.buffer, origin_offset=trimmed.offset)


def to_model_input(spec) -> np.ndarray:
    """Log-compress a ``(T, n_mels)`` energy matrix into a ``(n_mels, T)`` array in [0, 1].

    Energies are converted to dB relative to the recording's maximum,
    floored at -80 dB and rescaled so the floor maps to 0 and the peak to 1.
    """
    frames = spec.frames if isinstance(spec, dsp.Spectrogram) else np.asarray(spec, dtype=np.float64)
    if frames.ndim != 2:
        raise ValueError("expected a 2-d (T, n_mels) spectrogram")
    peak = frames.max() if frames.size else 0.0
    if peak <= 0:
        return np.zeros(frames.T.shape)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(frames / peak)
    db = np.maximum(db, FLOOR_DB)
    return ((db - FLOOR_DB) / -FLOOR_DB).T
