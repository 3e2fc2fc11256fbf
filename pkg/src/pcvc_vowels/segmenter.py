"""Vowel localisation by short-window RMS against the leading-silence ceiling.

The first ``lead_s`` seconds of every clip are assumed silent. The loudest
RMS frame in that stretch is the noise ceiling, and frames louder than twice
the ceiling are vowel candidates. The longest qualifying run wins.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .audio_io import AudioClip
from .errors import ClipTooShort, DegenerateThreshold, LeadTooShort, NoVowelFound


@dataclass(frozen=True)
class IntensityTrack:
    values: np.ndarray
    frame_ms: float
    hop_ms: float
    sample_rate: int

    @property
    def frame_samples(self) -> int:
        return ms_to_samples(self.frame_ms, self.sample_rate)

    @property
    def hop_samples(self) -> int:
        return ms_to_samples(self.hop_ms, self.sample_rate)


@dataclass(frozen=True)
class VowelSegment:
    start_sample: int
    end_sample: int  # exclusive
    noise_ceiling: float
    threshold: float
    source_rate: int

    @property
    def start_s(self) -> float:
        return self.start_sample / self.source_rate

    @property
    def end_s(self) -> float:
        return self.end_sample / self.source_rate

    def __len__(self):
        return self.end_sample - self.start_sample

    def to_json(self) -> dict:
        return {
            "start_s": self.start_s,
            "end_s": self.end_s,
            "noise_ceiling": self.noise_ceiling,
            "threshold": self.threshold,
        }


@dataclass(frozen=True)
class SegmentParams:
    frame_ms: float = 10.0
    hop_ms: float = 5.0
    lead_s: float = 0.25
    pad_ms: float = 30.0
    min_run_ms: float = 40.0

    def to_dict(self) -> dict:
        return asdict(self)


def ms_to_samples(ms: float, sample_rate: int) -> int:
    return max(1, int(round(ms * sample_rate / 1000.0)))


def frame_rms(clip: AudioClip, frame_ms: float = 10.0, hop_ms: float = 5.0) -> IntensityTrack:
    """RMS of rectangular windows of ``frame_ms`` taken every ``hop_ms``."""
    if not (frame_ms >= hop_ms > 0):
        raise ValueError(f"need frame_ms >= hop_ms > 0, got {frame_ms}, {hop_ms}")
    frame = ms_to_samples(frame_ms, clip.sample_rate)
    hop = ms_to_samples(hop_ms, clip.sample_rate)
    x = clip.samples
    if x.size < frame:
        raise ClipTooShort(f"clip has {x.size} samples, one frame needs {frame}")
    n = (x.size - frame) // hop + 1
    windows = np.lib.stride_tricks.sliding_window_view(x, frame)[::hop][:n]
    values = np.sqrt(np.mean(windows * windows, axis=1))
    return IntensityTrack(values, frame_ms, hop_ms, clip.sample_rate)


def noise_ceiling(track: IntensityTrack, lead_s: float = 0.25) -> float:
    """Largest RMS among frames lying wholly inside the first ``lead_s`` seconds."""
    frame, hop = track.frame_samples, track.hop_samples
    lead = int(round(lead_s * track.sample_rate))
    covered = (track.values.size - 1) * hop + frame
    if covered < lead:
        raise LeadTooShort(f"clip covers {covered} samples, lead needs {lead}")
    n_lead = (lead - frame) // hop + 1 if lead >= frame else 0
    if n_lead <= 0:
        raise LeadTooShort(f"lead of {lead_s}s is shorter than one {track.frame_ms}ms frame")
    return float(np.max(track.values[:n_lead]))


def _runs(mask: np.ndarray):
    """(first, last) inclusive index pairs of True runs."""
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def extract_vowel(clip: AudioClip, params: SegmentParams | None = None, **overrides) -> VowelSegment:
    """Locate the vowel in ``clip``.

    A run of loud frames ``a..b`` maps to samples from the centre of frame
    ``a`` to the centre of frame ``b``, which puts each boundary within one
    hop of a sharp onset/offset. The interval is then padded by ``pad_ms``
    on both sides and clamped to the clip.
    """
    p = params or SegmentParams()
    if overrides:
        p = SegmentParams(**{**p.to_dict(), **overrides})
    track = frame_rms(clip, p.frame_ms, p.hop_ms)
    ceiling = noise_ceiling(track, p.lead_s)
    threshold = 2.0 * ceiling
    if ceiling == 0.0:
        if not np.any(track.values > 0.0):
            raise NoVowelFound("clip is digital silence")
        raise DegenerateThreshold("leading silence is exactly zero; threshold would accept any signal")

    frame, hop = track.frame_samples, track.hop_samples
    min_run = p.min_run_ms * clip.sample_rate / 1000.0
    best = None
    for a, b in _runs(track.values > threshold):
        length = (b - a) * hop
        if length < min_run:
            continue
        if best is None or length > best[2]:
            best = (a, b, length)
    if best is None:
        raise NoVowelFound(f"no run above {threshold:.3g} RMS lasts {p.min_run_ms}ms")

    a, b, _ = best
    pad = int(round(p.pad_ms * clip.sample_rate / 1000.0))
    start = max(0, a * hop + frame // 2 - pad)
    end = min(len(clip), b * hop + frame // 2 + pad)
    return VowelSegment(start, end, ceiling, threshold, clip.sample_rate)
