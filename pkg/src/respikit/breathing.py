"""Inhale/exhale segmentation of breathing recordings and respiratory indicators.

The pipeline splits a recording into non-silent intervals, summarizes each
interval by its 128-band mel profile summed over time, groups the profiles
with affinity propagation and names the groups by loudness: the loudest
cluster is exhalation, the runner-up inhalation, the rest "other".
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import apcluster, dsp
from .dsp import AudioBuffer, Interval, Spectrogram

EXHALATION = "exhalation"
INHALATION = "inhalation"
OTHER = "other"

RR_NORMAL = (16.0, 20.0)
IE_NORMAL = (1.0 / 3.0, 1.0 / 2.0)
FIT_NORMAL = (0.421 - 0.033, 0.421 + 0.033)


@dataclass(frozen=True)
class BreathInterval:
    interval: Interval
    label: str = OTHER
    mean_amplitude: float = 0.0
    cluster_id: int = -1

    @property
    def start_s(self):
        return self.interval.start_s

    @property
    def end_s(self):
        return self.interval.end_s

    @property
    def duration(self):
        return self.interval.duration


@dataclass(frozen=True)
class RespiratoryIndicators:
    """Cycle statistics of one recording; undefined values are ``None``."""

    rr: Optional[float]
    i_e_ratio: Optional[float]
    fit: Optional[float]
    t_i: Optional[float]
    t_e: Optional[float]
    t_tot: Optional[float]
    cycle_count: int
    rr_normal: Optional[bool] = None
    i_e_normal: Optional[bool] = None
    fit_normal: Optional[bool] = None

    def to_record(self) -> dict:
        """Field names of ``breathing_features.json``."""
        return {"RR": self.rr, "I_E_ratio": self.i_e_ratio, "FIT": self.fit}


@dataclass(frozen=True)
class SegmentationConfig:
    trim_db: float = dsp.TRIM_DB
    split_db: float = dsp.SPLIT_DB
    min_gap_s: float = dsp.MIN_GAP_S
    min_len_s: float = dsp.MIN_LEN_S
    floor_margin_db: Optional[float] = 6.0
    fft_size: int = dsp.FFT_SIZE
    hop: int = dsp.HOP
    n_mels: int = dsp.N_MELS
    preference: Optional[float] = None
    damping: float = apcluster.DAMPING
    max_iter: int = apcluster.MAX_ITER
    conv_iter: int = apcluster.CONV_ITER
    seed: int = 0
    localize: bool = False
    profile_scale: str = "db"

    def updated(self, **kwargs) -> "SegmentationConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Segmentation:
    """Output of :func:`segment_breathing`.

    ``duration`` is the post-trim length used as the RR denominator and
    ``offset`` the trimmed lead-in; interval times refer to the input buffer.
    """

    intervals: tuple
    empty: bool
    duration: float
    offset: float
    assignment: Optional[apcluster.ClusterAssignment] = field(default=None, compare=False)


def frequency_profile(spec: Spectrogram) -> np.ndarray:
    """Sum of each mel band over time: a ``n_mels`` vector."""
    return spec.frames.sum(axis=0)


def clustering_features(profiles: np.ndarray, scale: str = "db") -> np.ndarray:
    """Map summed profiles to the space in which distances are measured.

    ``"db"`` takes ``10 log10`` of each band, so a uniform gain becomes a
    constant shift that cancels in every pairwise distance; ``"linear"``
    uses the raw sums.
    """
    if scale == "linear":
        return profiles
    if scale == "db":
        floor = np.finfo(np.float64).tiny
        return 10.0 * np.log10(np.maximum(profiles, floor))
    raise ValueError(f"unknown profile scale {scale!r}")


def label_clusters(intervals: Sequence[BreathInterval], assignment=None) -> list[BreathInterval]:
    """Name clusters by their average member loudness.

    Parameters
    ----------
    intervals : sequence of BreathInterval
        Drafts carrying ``mean_amplitude`` and, unless ``assignment`` is
        given, ``cluster_id``.
    assignment : ClusterAssignment, optional
        Source of cluster ids (one per interval, in order).

    Returns
    -------
    list of BreathInterval
        Same order as the input. The cluster with the largest mean amplitude
        becomes exhalation, the second inhalation, all others other. Equal
        means rank the lower cluster id first.
    """
    intervals = list(intervals)
    if not intervals:
        return []
    if assignment is not None:
        ids = list(assignment.labels)
        if len(ids) != len(intervals):
            raise ValueError("assignment does not match the number of intervals")
        intervals = [replace(iv, cluster_id=int(c)) for iv, c in zip(intervals, ids)]

    sums, counts = {}, {}
    for iv in intervals:
        sums[iv.cluster_id] = sums.get(iv.cluster_id, 0.0) + iv.mean_amplitude
        counts[iv.cluster_id] = counts.get(iv.cluster_id, 0) + 1
    means = {c: sums[c] / counts[c] for c in sums}
    ranked = sorted(means, key=lambda c: (-means[c], c))
    names = {c: OTHER for c in ranked}
    names[ranked[0]] = EXHALATION
    if len(ranked) > 1:
        names[ranked[1]] = INHALATION
    return [replace(iv, label=names[iv.cluster_id]) for iv in intervals]


def _interval_spectrogram(buf: AudioBuffer, iv: Interval, cfg: SegmentationConfig) -> Spectrogram:
    piece = buf.slice(iv.start_s, iv.end_s).samples
    if len(piece) < cfg.fft_size:
        piece = np.pad(piece, (0, cfg.fft_size - len(piece)))
    return dsp.mel_spectrogram(AudioBuffer(piece, buf.sample_rate), cfg.fft_size, cfg.hop, cfg.n_mels)


def segment_breathing(
    buf: AudioBuffer,
    config: Optional[SegmentationConfig] = None,
    localizer: Optional[Callable[[AudioBuffer], list]] = None,
) -> Segmentation:
    """Find and label the breathing phases of one recording.

    Parameters
    ----------
    buf : AudioBuffer
        Raw recording; it is peak-normalized and silence-trimmed first.
    config : SegmentationConfig, optional
    localizer : callable, optional
        Maps the trimmed buffer to the intervals holding breathing. Used
        only when ``config.localize`` is set; see :func:`cnn_breath_localizer`.

    Returns
    -------
    Segmentation
        Time-sorted, disjoint labeled intervals. ``empty`` is set when no
        non-silent interval was found.
    """
    cfg = config or SegmentationConfig()
    trimmed = dsp.trim_silence(dsp.normalize(buf), cfg.trim_db)
    if trimmed.empty:
        return Segmentation((), True, 0.0, 0.0)
    body = trimmed.buffer

    regions = [Interval(0.0, body.duration)]
    if cfg.localize:
        if localizer is None:
            raise ValueError("config.localize is set but no localizer was supplied")
        regions = list(localizer(body))

    found = []
    for region in regions:
        part = body.slice(region.start_s, region.end_s)
        if len(part) == 0:
            continue
        for iv in dsp.split_nonsilent(
            part, cfg.split_db, cfg.min_gap_s, cfg.min_len_s, floor_margin_db=cfg.floor_margin_db
        ):
            found.append(Interval(iv.start_s + region.start_s, iv.end_s + region.start_s))
    if not found:
        return Segmentation((), True, body.duration, trimmed.offset)

    drafts, profiles = [], []
    for iv in found:
        piece = body.slice(iv.start_s, iv.end_s).samples
        amp = float(np.mean(np.abs(piece))) if len(piece) else 0.0
        drafts.append(BreathInterval(iv, OTHER, amp))
        profiles.append(frequency_profile(_interval_spectrogram(body, iv, cfg)))

    S = apcluster.negative_sq_euclidean(clustering_features(np.vstack(profiles), cfg.profile_scale))
    if len(drafts) > 1:
        pref = apcluster.default_preference(S) if cfg.preference is None else cfg.preference
        np.fill_diagonal(S, pref)
    assignment = apcluster.cluster(S, cfg.damping, cfg.max_iter, cfg.conv_iter, cfg.seed)
    labeled = label_clusters(drafts, assignment)

    shift = trimmed.offset
    out = tuple(
        replace(iv, interval=Interval(iv.start_s + shift, iv.end_s + shift))
        for iv in sorted(labeled, key=lambda x: x.start_s)
    )
    return Segmentation(out, False, body.duration, shift, assignment)


def respiratory_indicators(intervals: Sequence[BreathInterval], total_duration_s: float) -> RespiratoryIndicators:
    """RR, I/E ratio and FIT from labeled intervals.

    Each inhalation is paired with the next exhalation in time, provided no
    other inhalation comes first; "other" intervals are ignored. ``t_i`` and
    ``t_e`` are mean durations over the pairs, ``rr`` counts pairs per
    minute of ``total_duration_s``. Without any detected inhalation the
    exhalation count drives RR and the timing ratios stay undefined.
    """
    if total_duration_s <= 0:
        raise ValueError("total duration must be positive")
    ordered = sorted(
        (iv for iv in intervals if iv.label in (INHALATION, EXHALATION)), key=lambda iv: iv.start_s
    )
    pairs = []
    pending = None
    for iv in ordered:
        if iv.label == INHALATION:
            pending = iv
        elif pending is not None:
            pairs.append((pending, iv))
            pending = None

    n_inh = sum(iv.label == INHALATION for iv in ordered)
    n_exh = sum(iv.label == EXHALATION for iv in ordered)
    rr = t_i = t_e = t_tot = ie = fit = None
    if pairs:
        t_i = float(np.mean([p[0].duration for p in pairs]))
        t_e = float(np.mean([p[1].duration for p in pairs]))
        t_tot = t_i + t_e
        ie = t_i / t_e
        fit = t_i / t_tot
        rr = len(pairs) / total_duration_s * 60.0
    elif n_inh == 0 and n_exh > 0:
        rr = n_exh / total_duration_s * 60.0

    def within(value, bounds):
        return None if value is None else bool(bounds[0] <= value <= bounds[1])

    return RespiratoryIndicators(
        rr=rr,
        i_e_ratio=ie,
        fit=fit,
        t_i=t_i,
        t_e=t_e,
        t_tot=t_tot,
        cycle_count=len(pairs),
        rr_normal=within(rr, RR_NORMAL),
        i_e_normal=within(ie, IE_NORMAL),
        fit_normal=within(fit, FIT_NORMAL),
    )


def intervals_from_annotation(inhalations, exhalations) -> list[BreathInterval]:
    """Labeled intervals from ``(start, end)`` pairs, e.g. manual annotations."""
    out = [BreathInterval(Interval(float(a), float(b)), INHALATION) for a, b in inhalations]
    out += [BreathInterval(Interval(float(a), float(b)), EXHALATION) for a, b in exhalations]
    return sorted(out, key=lambda iv: iv.start_s)


def annotated_indicators(inhalations, exhalations, total_duration_s=None) -> RespiratoryIndicators:
    """Reference indicators from annotated phases.

    When ``total_duration_s`` is omitted the span from the first annotated
    onset to the last offset is used, mirroring the trimmed duration of the
    automatic path.
    """
    ivs = intervals_from_annotation(inhalations, exhalations)
    if not ivs:
        return respiratory_indicators([], 1.0)
    if total_duration_s is None:
        total_duration_s = max(iv.end_s for iv in ivs) - min(iv.start_s for iv in ivs)
    return respiratory_indicators(ivs, total_duration_s)


def breath_features(buf: AudioBuffer, config: Optional[SegmentationConfig] = None, localizer=None) -> dict:
    """Segment one recording and return a ``breathing_features.json``-style dict."""
    seg = segment_breathing(buf, config, localizer)
    if seg.empty:
        ind = RespiratoryIndicators(None, None, None, None, None, None, 0)
    else:
        ind = respiratory_indicators(seg.intervals, seg.duration)
    out = ind.to_record()
    out["estimated_inhalation"] = [[iv.start_s, iv.end_s] for iv in seg.intervals if iv.label == INHALATION]
    out["estimated_exhalation"] = [[iv.start_s, iv.end_s] for iv in seg.intervals if iv.label == EXHALATION]
    out["other"] = [[iv.start_s, iv.end_s] for iv in seg.intervals if iv.label == OTHER]
    out["cycle_count"] = ind.cycle_count
    out["duration_s"] = seg.duration
    out["empty"] = seg.empty
    return out


def rmse_vs_annotation(predicted, reference) -> dict:
    """Per-indicator root mean square error over paired recordings.

    Pairs where either side is undefined are skipped for that indicator; an
    indicator with no usable pair maps to ``None``.

    Raises
    ------
    ValueError
        If the lists are empty or differ in length.
    """
    predicted, reference = list(predicted), list(reference)
    if not predicted or len(predicted) != len(reference):
        raise ValueError("need two non-empty lists of equal length")
    out = {}
    for name in ("rr", "i_e_ratio", "fit"):
        diffs = [
            getattr(p, name) - getattr(r, name)
            for p, r in zip(predicted, reference)
            if getattr(p, name) is not None and getattr(r, name) is not None
        ]
        out[name] = math.sqrt(np.mean(np.square(diffs))) if diffs else None
    return out


def cnn_breath_localizer(models, breath_index: int = 1, **mel_kwargs):
    """Localizer backed by a CNN ensemble.

    Each frame takes the mean class probabilities of every window covering
    it; contiguous frames whose argmax is ``breath_index`` form the regions.
    """
    from .classifier import inference

    def localize(buf: AudioBuffer) -> list[Interval]:
        spec = dsp.mel_spectrogram(buf, **mel_kwargs)
        T = spec.n_frames
        acc = np.zeros((T, 3))
        hits = np.zeros(T)
        for model in models:
            d = model.config.d
            if T < d:
                continue
            probs = inference.sliding_window_predict(model, spec)
            # frame t is covered by windows starting in [t-d+1, t]
            csum = np.vstack([np.zeros((1, 3)), np.cumsum(probs, axis=0)])
            starts = np.arange(T)
            lo = np.clip(starts - d + 1, 0, len(probs))
            hi = np.clip(starts + 1, 0, len(probs))
            acc += csum[hi] - csum[lo]
            hits += hi - lo
        if not hits.any():
            return [Interval(0.0, buf.duration)]
        is_breath = np.argmax(acc, axis=1) == breath_index
        is_breath &= hits > 0
        regions = []
        padded = np.concatenate([[False], is_breath, [False]])
        edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
        for a, b in zip(edges[::2], edges[1::2]):
            start = a * spec.frame_hop
            end = min(buf.duration, (b - 1) * spec.frame_hop + mel_kwargs.get("fft_size", dsp.FFT_SIZE) / buf.sample_rate)
            if end > start:
                regions.append(Interval(start, end))
        return regions

    return localize
