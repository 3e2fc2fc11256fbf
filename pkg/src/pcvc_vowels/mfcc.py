"""MFCC front end: Hamming-windowed frames, power spectrum, mel triangles,
natural log, orthonormal DCT-II, then mean pooling over frames.

Defaults are 20 ms frames every 10 ms, 100 mel bands and 50 coefficients
(c0 included). No pre-emphasis unless ``MfccConfig.preemphasis`` is set.
"""

from __future__ import annotations

import functools
from dataclasses import asdict, dataclass

import numpy as np

from .audio_io import AudioClip
from .errors import EmptyMatrix, NegativeFrequency, SegmentTooShort, TooFewBins
from .segmenter import VowelSegment, ms_to_samples


@dataclass(frozen=True)
class MfccConfig:
    frame_ms: float = 20.0
    hop_ms: float = 10.0
    n_bands: int = 100
    n_coeffs: int = 50
    fmin: float = 0.0
    fmax: float | None = None  # None = Nyquist
    log_floor: float = 1e-10
    preemphasis: float = 0.0

    def __post_init__(self):
        if self.n_coeffs > self.n_bands:
            raise ValueError(f"n_coeffs ({self.n_coeffs}) must not exceed n_bands ({self.n_bands})")
        if self.n_coeffs < 1 or self.n_bands < 1:
            raise ValueError("n_bands and n_coeffs must be positive")
        if not self.frame_ms >= self.hop_ms > 0:
            raise ValueError("need frame_ms >= hop_ms > 0")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")

    def band_limits(self, sample_rate: int) -> tuple[float, float]:
        fmax = sample_rate / 2.0 if self.fmax is None else float(self.fmax)
        if not 0 <= self.fmin < fmax <= sample_rate / 2.0:
            raise ValueError(f"need 0 <= fmin < fmax <= {sample_rate / 2} Hz, got {self.fmin}, {fmax}")
        return float(self.fmin), fmax

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray  # (n_bands, n_fft // 2 + 1)
    edges_hz: np.ndarray  # (n_bands + 2,)
    n_fft: int
    sample_rate: int

    @property
    def centres_hz(self) -> np.ndarray:
        return self.edges_hz[1:-1]


@dataclass(frozen=True)
class MfccMatrix:
    frames: np.ndarray  # (T, n_coeffs)
    config: MfccConfig
    sample_rate: int

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    mode: str = "mean"

    def __len__(self):
        return self.values.size


def hz_to_mel(f):
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise NegativeFrequency(f"frequency must be non-negative, got {f}")
    out = 2595.0 * np.log10(1.0 + f / 700.0)
    return float(out) if out.ndim == 0 else out


def mel_to_hz(m):
    m = np.asarray(m, dtype=float)
    if np.any(m < 0):
        raise NegativeFrequency(f"mel value must be non-negative, got {m}")
    out = 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    return float(out) if out.ndim == 0 else out


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n) - 1).bit_length()


def hamming(n: int) -> np.ndarray:
    if n == 1:
        return np.ones(1)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(n) / (n - 1))


def frame_signal(clip: AudioClip, segment: VowelSegment | None, cfg: MfccConfig) -> np.ndarray:
    """Hamming-windowed frames of the segment, shape (T, frame_samples).

    A trailing partial frame is dropped. ``segment=None`` frames the whole clip.
    """
    x = clip.samples if segment is None else clip.samples[segment.start_sample:segment.end_sample]
    if cfg.preemphasis:
        x = np.append(x[:1], x[1:] - cfg.preemphasis * x[:-1])
    frame = ms_to_samples(cfg.frame_ms, clip.sample_rate)
    hop = ms_to_samples(cfg.hop_ms, clip.sample_rate)
    if x.size < frame:
        raise SegmentTooShort(f"segment of {x.size} samples is shorter than one {frame}-sample frame")
    n = (x.size - frame) // hop + 1
    frames = np.lib.stride_tricks.sliding_window_view(x, frame)[::hop][:n]
    return frames * hamming(frame)


def power_spectrum(frame, n_fft: int | None = None) -> np.ndarray:
    """|DFT|^2 on bins 0..n_fft/2, zero-padding to the next power of two.

    Works row-wise on a 2-D stack of frames.
    """
    frame = np.asarray(frame, dtype=float)
    if frame.shape[-1] == 0:
        raise ValueError("empty frame")
    n_fft = n_fft or next_pow2(frame.shape[-1])
    spec = np.fft.rfft(frame, n_fft, axis=-1)
    return spec.real**2 + spec.imag**2


def build_filterbank(cfg: MfccConfig, n_fft: int, sample_rate: int) -> MelFilterbank:
    return _filterbank(cfg.n_bands, *cfg.band_limits(sample_rate), n_fft, sample_rate)


@functools.lru_cache(maxsize=32)
def _filterbank(n_bands: int, fmin: float, fmax: float, n_fft: int, sample_rate: int) -> MelFilterbank:
    n_bins = n_fft // 2 + 1
    if n_bins < n_bands:
        raise TooFewBins(f"{n_bins} FFT bins cannot host {n_bands} mel bands")
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_bands + 2))
    bins_hz = np.arange(n_bins) * sample_rate / n_fft
    left, peak, right = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bins_hz - left) / (peak - left)
    falling = (right - bins_hz) / (right - peak)
    weights = np.clip(np.minimum(rising, falling), 0.0, None)
    # low bands can be narrower than the bin spacing; keep them alive on the nearest bin
    for k in np.flatnonzero(weights.max(axis=1) == 0.0):
        weights[k, int(np.argmin(np.abs(bins_hz - edges[k + 1])))] = 1.0
    weights.setflags(write=False)
    edges.setflags(write=False)
    return MelFilterbank(weights, edges, n_fft, sample_rate)


def log_mel_energies(spectrum, bank: MelFilterbank, log_floor: float = 1e-10) -> np.ndarray:
    spectrum = np.asarray(spectrum, dtype=float)
    if spectrum.shape[-1] != bank.weights.shape[1]:
        raise ValueError(f"spectrum has {spectrum.shape[-1]} bins, filterbank expects {bank.weights.shape[1]}")
    return np.log(np.maximum(spectrum @ bank.weights.T, log_floor))


@functools.lru_cache(maxsize=8)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis; row k holds coefficient k."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    g = np.cos(np.pi * k * (2 * i + 1) / (2 * n)) * np.sqrt(2.0 / n)
    g[0] *= np.sqrt(0.5)
    g.setflags(write=False)
    return g


def dct_ii(log_energies, n_coeffs: int | None = None) -> np.ndarray:
    x = np.asarray(log_energies, dtype=float)
    n = x.shape[-1]
    n_coeffs = n if n_coeffs is None else n_coeffs
    if n_coeffs > n:
        raise ValueError(f"cannot take {n_coeffs} coefficients from {n} inputs")
    return x @ dct_matrix(n)[:n_coeffs].T


def mfcc(clip: AudioClip, segment: VowelSegment | None, cfg: MfccConfig = MfccConfig()) -> MfccMatrix:
    frames = frame_signal(clip, segment, cfg)
    n_fft = next_pow2(frames.shape[1])
    bank = build_filterbank(cfg, n_fft, clip.sample_rate)
    logmel = log_mel_energies(power_spectrum(frames, n_fft), bank, cfg.log_floor)
    return MfccMatrix(dct_ii(logmel, cfg.n_coeffs), cfg, clip.sample_rate)


def pool_features(m: MfccMatrix, mode: str = "mean") -> FeatureVector:
    if mode != "mean":
        raise ValueError(f"unknown pooling mode {mode!r}")
    if m.frames.shape[0] == 0:
        raise EmptyMatrix("cannot pool a matrix with no frames")
    return FeatureVector(m.frames.mean(axis=0), mode)
