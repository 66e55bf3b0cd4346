"""Synthetic recordings with known ground truth.

Two generators live here: breathing recordings with labeled inhale/exhale
phases, and a three-class texture set standing in for cough / breath /
voice spectrograms in classifier benchmarks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .dsp import SAMPLE_RATE, AudioBuffer, Interval

EXHALATION = "exhalation"
INHALATION = "inhalation"


@dataclass(frozen=True)
class SyntheticBreath:
    buffer: AudioBuffer
    inhalations: tuple
    exhalations: tuple
    t_i: float
    t_e: float

    @property
    def active_span(self) -> tuple[float, float]:
        """Start of the first phase to the end of the last one (seconds)."""
        phases = self.inhalations + self.exhalations
        return min(p.start_s for p in phases), max(p.end_s for p in phases)


def _shaped_noise(rng, n, sr, band, order=4):
    sos = signal.butter(order, band, btype="bandpass", fs=sr, output="sos")
    x = signal.sosfilt(sos, rng.standard_normal(n + 2048))[2048:]
    return x / (np.std(x) + 1e-12)


def _envelope(n, sr, ramp_s=0.08):
    ramp = min(n // 2, int(ramp_s * sr))
    env = np.ones(n)
    if ramp > 0:
        r = 0.5 - 0.5 * np.cos(np.linspace(0, np.pi, ramp))
        env[:ramp] = r
        env[-ramp:] = r[::-1]
    return env


def breathing_recording(
    rng,
    n_cycles: int = 8,
    t_i: float = 1.0,
    t_e: float = 2.0,
    pause_s: float = 0.4,
    exhale_gain: float = 1.0,
    inhale_gain: float = 0.3,
    snr_db: float | None = 30.0,
    jitter: float = 0.05,
    lead_s: float = 0.5,
    sample_rate: int = SAMPLE_RATE,
) -> SyntheticBreath:
    """Alternating inhale/exhale bursts separated by pauses.

    Exhalations are loud low-frequency-weighted noise, inhalations quieter
    and brighter. Each cycle is ``inhale, pause, exhale, pause`` with
    per-phase durations jittered by ``+-jitter`` (relative). ``snr_db`` is
    measured against the power of the quieter (inhale) phase, so every
    phase is at least that far above the white noise floor.
    """
    sr = sample_rate
    pieces = [np.zeros(int(lead_s * sr))]
    pos = len(pieces[0])
    inh, exh = [], []
    for _ in range(n_cycles):
        for label, dur, gain, band in (
            (INHALATION, t_i, inhale_gain, (900.0, 4000.0)),
            (EXHALATION, t_e, exhale_gain, (150.0, 1200.0)),
        ):
            d = dur * (1 + jitter * rng.uniform(-1, 1))
            n = int(d * sr)
            burst = gain * _shaped_noise(rng, n, sr, band) * _envelope(n, sr)
            pieces.append(burst)
            (inh if label == INHALATION else exh).append(Interval(pos / sr, (pos + n) / sr))
            pos += n
            gap = int(pause_s * (1 + jitter * rng.uniform(-1, 1)) * sr)
            pieces.append(np.zeros(gap))
            pos += gap
    x = np.concatenate(pieces)
    if snr_db is not None:
        noise_rms = inhale_gain / (10 ** (snr_db / 20))
        x = x + noise_rms * rng.standard_normal(len(x))
    x = x / np.max(np.abs(x))
    return SyntheticBreath(AudioBuffer(x, sr), tuple(inh), tuple(exh), t_i, t_e)


# --- three-class textures -------------------------------------------------------

TOY_CLASSES = ("band_noise", "tone_ladder", "chirp")


def _band_noise(rng, n, sr):
    lo = rng.uniform(200, 3000)
    hi = lo * rng.uniform(1.5, 3.0)
    x = _shaped_noise(rng, n, sr, (lo, min(hi, 0.45 * sr)))
    t = np.arange(n) / sr
    am = 1 + 0.5 * np.sin(2 * np.pi * rng.uniform(1, 4) * t + rng.uniform(0, 2 * np.pi))
    return x * am


def _tone_ladder(rng, n, sr):
    steps = rng.integers(3, 7)
    f0 = rng.uniform(200, 800)
    ratio = rng.uniform(1.1, 1.4) ** rng.choice([-1, 1])
    freqs = f0 * ratio ** np.arange(steps)
    edges = np.linspace(0, n, steps + 1).astype(int)
    x = np.zeros(n)
    phase = 0.0
    for f, a, b in zip(freqs, edges[:-1], edges[1:]):
        t = np.arange(b - a) / sr
        x[a:b] = np.sin(phase + 2 * np.pi * f * t) + 0.4 * np.sin(2 * (phase + 2 * np.pi * f * t))
        phase += 2 * np.pi * f * (b - a) / sr
    return x


def _chirp(rng, n, sr):
    t = np.arange(n) / sr
    period = rng.uniform(0.3, 0.7)
    f_lo = rng.uniform(300, 1000)
    f_hi = f_lo * rng.uniform(2.5, 5.0)
    tt = (t % period) / period
    inst = f_lo + (f_hi - f_lo) * tt
    return np.sin(2 * np.pi * np.cumsum(inst) / sr)


_TOY_MAKERS = (_band_noise, _tone_ladder, _chirp)


def toy_recording(rng, label: int, duration_s: float, snr_db: float = 20.0, sample_rate=SAMPLE_RATE):
    n = int(duration_s * sample_rate)
    x = _TOY_MAKERS[label](rng, n, sample_rate)
    x = x / (np.std(x) + 1e-12)
    x = x + 10 ** (-snr_db / 20) * rng.standard_normal(n)
    return AudioBuffer(x / np.max(np.abs(x)), sample_rate)


def toy_dataset(rng, n_per_class: int, duration_s=(1.4, 1.8), snr_db=(10.0, 30.0)):
    """Balanced list of ``(AudioBuffer, label)`` pairs in shuffled order."""
    items = []
    for label in range(len(TOY_CLASSES)):
        for _ in range(n_per_class):
            d = rng.uniform(*duration_s)
            items.append((toy_recording(rng, label, d, rng.uniform(*snr_db)), label))
    order = rng.permutation(len(items))
    return [items[i] for i in order]
