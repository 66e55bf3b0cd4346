"""Audio decoding, conditioning and the 128-band mel representation.

All functions are pure: they take and return immutable values.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy import signal
from scipy.io import wavfile

SAMPLE_RATE = 48000
N_MELS = 128
FFT_SIZE = 2048
HOP = 480

TRIM_DB = -40.0
SPLIT_DB = -35.0
MIN_GAP_S = 0.25
MIN_LEN_S = 0.2


class AudioError(Exception):
    pass


class DecodeError(AudioError):
    pass


class EmptyAudioError(AudioError):
    pass


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono waveform with its sample rate."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("AudioBuffer holds mono samples (1-d array)")
        if not np.all(np.isfinite(x)):
            raise ValueError("AudioBuffer samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def scaled(self, gain: float) -> "AudioBuffer":
        return AudioBuffer(self.samples * gain, self.sample_rate)

    def slice(self, start_s: float, end_s: float) -> "AudioBuffer":
        a = max(0, int(round(start_s * self.sample_rate)))
        b = min(len(self), int(round(end_s * self.sample_rate)))
        return AudioBuffer(self.samples[a:b], self.sample_rate)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Time x mel-band energy matrix.

    ``frames`` has shape ``(T, n_mels)``; ``frame_hop`` is in seconds and
    ``origin_offset`` locates frame 0 relative to the source buffer start.
    """

    frames: np.ndarray
    frame_hop: float
    origin_offset: float = 0.0

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64)
        if f.ndim != 2:
            raise ValueError("spectrogram frames must be a 2-d (T, n_mels) array")
        if np.any(f < 0):
            raise ValueError("mel energies must be non-negative")
        f.setflags(write=False)
        object.__setattr__(self, "frames", f)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_mels(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class Interval:
    start_s: float
    end_s: float

    def __post_init__(self):
        if not (0 <= self.start_s < self.end_s):
            raise ValueError(f"invalid interval ({self.start_s}, {self.end_s})")

    @property
    def duration(self) -> float:
        return self.end_s - self.start_s


class Trimmed(NamedTuple):
    buffer: AudioBuffer
    offset: float
    empty: bool


# --- decoding ---------------------------------------------------------------

Decoder = Callable[[str], "tuple[np.ndarray, int]"]
_DECODERS: dict[str, Decoder] = {}


def register_decoder(suffix: str, decoder: Decoder) -> None:
    """Install ``decoder(path) -> (samples[, channels], sample_rate)`` for a suffix."""
    _DECODERS[suffix.lower()] = decoder


def _decode_wav(path):
    try:
        rate, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    return _int_to_float(data), rate


def _decode_soundfile(path):
    try:
        import soundfile
    except ImportError as exc:
        raise DecodeError(
            f"{path}: MP3 decoding needs the optional 'soundfile' package"
        ) from exc
    try:
        data, rate = soundfile.read(path, dtype="float64", always_2d=False)
    except Exception as exc:  # libsndfile raises its own error types
        raise DecodeError(f"{path}: {exc}") from exc
    return data, rate


register_decoder(".wav", _decode_wav)
register_decoder(".mp3", _decode_soundfile)
register_decoder(".flac", _decode_soundfile)


def _int_to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        # 24-bit PCM is delivered left-justified in int32
        return data.astype(np.float64) / 2147483648.0
    return data.astype(np.float64)


def load_audio(path, sample_rate: int = SAMPLE_RATE) -> AudioBuffer:
    """Decode a file to a mono buffer at ``sample_rate``.

    Multi-channel input is averaged; any other rate is resampled with a
    polyphase filter.

    Raises
    ------
    DecodeError
        No decoder for the suffix, or the stream is undecodable.
    EmptyAudioError
        The stream holds no samples.
    """
    path = os.fspath(path)
    suffix = os.path.splitext(path)[1].lower()
    decoder = _DECODERS.get(suffix)
    if decoder is None:
        raise DecodeError(f"{path}: no decoder registered for {suffix!r}")
    data, rate = decoder(path)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.size == 0:
        raise EmptyAudioError(f"{path}: zero-length audio stream")
    return AudioBuffer(resample(data, int(rate), sample_rate), sample_rate)


def resample(x: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    if rate_in == rate_out:
        return np.asarray(x, dtype=np.float64)
    ratio = Fraction(rate_out, rate_in)
    y = signal.resample_poly(x, ratio.numerator, ratio.denominator)
    n_out = int(round(len(x) * rate_out / rate_in))
    return y[:n_out]


def write_wav(path, buf: AudioBuffer) -> None:
    """Write a float32 WAV (handy for fixtures and demos)."""
    wavfile.write(os.fspath(path), buf.sample_rate, buf.samples.astype(np.float32))


# --- conditioning -------------------------------------------------------------


def normalize(buf: AudioBuffer) -> AudioBuffer:
    """Scale to unit peak amplitude; silent buffers pass through unchanged."""
    peak = np.max(np.abs(buf.samples)) if len(buf) else 0.0
    if peak == 0:
        return buf
    return AudioBuffer(buf.samples / peak, buf.sample_rate)


def frame_energy(x: np.ndarray, frame_length: int, hop: int) -> np.ndarray:
    """Mean-square energy of consecutive frames; the tail frame is zero padded."""
    n = len(x)
    if n == 0:
        return np.zeros(0)
    n_frames = 1 + max(0, math.ceil((n - frame_length) / hop))
    padded = np.zeros((n_frames - 1) * hop + frame_length)
    padded[:n] = x
    frames = np.lib.stride_tricks.sliding_window_view(padded, frame_length)[::hop]
    return np.mean(frames**2, axis=1)


def _to_db(energy: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(energy)


def trim_silence(
    buf: AudioBuffer,
    threshold_db: float = TRIM_DB,
    frame_length: int = 2048,
    hop: int = 512,
) -> Trimmed:
    """Drop leading and trailing frames quieter than ``peak + threshold_db``.

    The cut is repeated until nothing more is removed, which makes the
    operation idempotent by construction. A buffer without any energy comes
    back empty with ``empty=True``.
    """
    if threshold_db >= 0:
        raise ValueError("threshold_db must be negative (relative to peak)")
    x = buf.samples
    offset = 0
    while True:
        energy = frame_energy(x, frame_length, hop)
        if energy.size == 0 or energy.max() == 0:
            return Trimmed(AudioBuffer(np.zeros(0), buf.sample_rate), offset / buf.sample_rate, True)
        db = _to_db(energy)
        loud = np.flatnonzero(db >= db.max() + threshold_db)
        start = loud[0] * hop
        stop = min(len(x), loud[-1] * hop + frame_length)
        if start == 0 and stop == len(x):
            break
        x = x[start:stop]
        offset += start
    return Trimmed(AudioBuffer(x, buf.sample_rate), offset / buf.sample_rate, False)


# --- mel representation -------------------------------------------------------


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_edges(n_mels: int = N_MELS, sample_rate: int = SAMPLE_RATE, fmin=0.0, fmax=None):
    """``n_mels + 2`` edge frequencies (Hz), evenly spaced on the HTK mel scale.

    Band ``j`` rises from edge ``j`` to its centre at edge ``j + 1`` and
    falls back to zero at edge ``j + 2``.
    """
    fmax = sample_rate / 2 if fmax is None else fmax
    return mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))


@lru_cache(maxsize=16)
def _filterbank(n_mels, fft_size, sample_rate):
    edges = mel_band_edges(n_mels, sample_rate)
    freqs = np.fft.rfftfreq(fft_size, 1.0 / sample_rate)
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    area = fb.sum(axis=1, keepdims=True)
    if np.any(area == 0):
        raise ValueError("fft_size too small: some mel bands contain no FFT bin")
    fb = fb / area
    fb.setflags(write=False)
    return fb


def mel_filterbank(n_mels: int = N_MELS, fft_size: int = FFT_SIZE, sample_rate: int = SAMPLE_RATE):
    """Triangular HTK-mel filters of shape ``(n_mels, fft_size // 2 + 1)``.

    Rows are normalized to unit (discrete) area so a band's output is the
    weighted mean power over the bins it covers.
    """
    return _filterbank(n_mels, fft_size, sample_rate)


@lru_cache(maxsize=8)
def _hann(n):
    w = signal.get_window("hann", n, fftbins=True)
    w.setflags(write=False)
    return w


def power_spectrogram(x: np.ndarray, fft_size: int = FFT_SIZE, hop: int = HOP) -> np.ndarray:
    """|STFT|^2 with a periodic Hann window and no centering, shape ``(T, F)``."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < fft_size:
        raise ValueError(f"buffer of {len(x)} samples is shorter than one {fft_size}-sample window")
    frames = np.lib.stride_tricks.sliding_window_view(x, fft_size)[::hop]
    spec = np.fft.rfft(frames * _hann(fft_size), axis=1)
    return spec.real**2 + spec.imag**2


def mel_spectrogram(
    buf: AudioBuffer,
    fft_size: int = FFT_SIZE,
    hop: int = HOP,
    n_mels: int = N_MELS,
    origin_offset: float = 0.0,
) -> Spectrogram:
    """Mel-band power spectrogram.

    Parameters
    ----------
    buf : AudioBuffer
        At least ``fft_size`` samples long.
    fft_size, hop : int
        STFT window and hop in samples. The frame count is
        ``1 + (len(buf) - fft_size) // hop``.
    n_mels : int
        Number of bands spanning 0 Hz to Nyquist.

    Returns
    -------
    Spectrogram
        ``frames`` of shape ``(T, n_mels)``.
    """
    power = power_spectrogram(buf.samples, fft_size, hop)
    fb = mel_filterbank(n_mels, fft_size, buf.sample_rate)
    return Spectrogram(power @ fb.T, hop / buf.sample_rate, origin_offset)


# --- interval splitting -------------------------------------------------------


def split_nonsilent(
    buf: AudioBuffer,
    threshold_db: float = SPLIT_DB,
    min_gap_s: float = MIN_GAP_S,
    min_len_s: float = MIN_LEN_S,
    frame_s: float = 0.02,
    hop_s: float = 0.01,
    floor_margin_db: float | None = 6.0,
) -> list[Interval]:
    """Locate non-silent stretches of a recording.

    A frame is loud when its energy exceeds ``peak + threshold_db``. When
    the recording has a measurable noise floor (10th percentile of frame
    energy at least ``2 * floor_margin_db`` under the peak) the threshold
    is raised to ``floor + floor_margin_db`` so broadband noise is not
    mistaken for content. Runs separated by less than ``min_gap_s`` are
    merged, then runs shorter than ``min_len_s`` are dropped.

    Returns
    -------
    list of Interval
        Sorted, disjoint and clipped to the buffer.
    """
    sr = buf.sample_rate
    frame = max(1, int(round(frame_s * sr)))
    hop = max(1, int(round(hop_s * sr)))
    energy = frame_energy(buf.samples, frame, hop)
    if energy.size == 0 or energy.max() == 0:
        return []
    db = _to_db(energy)
    peak = db.max()
    threshold = peak + threshold_db
    if floor_margin_db is not None:
        finite = db[np.isfinite(db)]
        floor = np.percentile(finite, 10)
        if floor < peak - 2 * floor_margin_db:
            threshold = max(threshold, floor + floor_margin_db)
    loud = db > threshold

    runs = []
    padded = np.concatenate([[False], loud, [False]])
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    for a, b in zip(edges[::2], edges[1::2]):
        start = a * hop
        stop = min(len(buf), (b - 1) * hop + frame)
        runs.append([start / sr, stop / sr])

    merged = []
    for run in runs:
        if merged and run[0] - merged[-1][1] < min_gap_s:
            merged[-1][1] = max(merged[-1][1], run[1])
        else:
            merged.append(run)
    return [Interval(a, b) for a, b in merged if b - a >= min_len_s]
