"""Formant-synthesised stand-in for the PCVC recordings.

Each clip is 2 s long: a low noise floor, a noise-burst consonant surrogate,
a short quiet gap, then a vowel made by driving parallel two-pole resonators
with an impulse train. Everything is a pure function of its seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import signal

from .audio_io import AudioClip, write_wav
from .errors import InvalidLayout, InvalidProfile, IoFailure
from .manifest import Manifest, ManifestEntry, write_manifest
from .phonemes import CONSONANTS, VOWELS, VowelLabel

GENERATOR_VERSION = "1"
DEFAULT_SAMPLE_RATE = 16000
VOWEL_PEAK = 0.5
FADE_MS = 10.0


@dataclass(frozen=True)
class FormantProfile:
    f0: float
    formants: tuple  # ((centre_hz, bandwidth_hz, rel_amplitude), ...)
    label: VowelLabel

    def __post_init__(self):
        object.__setattr__(self, "formants", tuple(tuple(float(v) for v in f) for f in self.formants))
        if len(self.formants) < 2:
            raise InvalidProfile("a profile needs at least two formants")
        if self.f0 <= 0:
            raise InvalidProfile(f"f0 must be positive, got {self.f0}")
        for freq, bw, amp in self.formants:
            if freq <= 0 or bw <= 0:
                raise InvalidProfile(f"formant ({freq}, {bw}) must have positive frequency and bandwidth")
            if not 0 < amp <= 1:
                raise InvalidProfile(f"relative amplitude {amp} outside (0, 1]")

    def check_rate(self, sample_rate: int) -> None:
        nyquist = sample_rate / 2.0
        for freq, bw, _ in self.formants:
            if freq >= nyquist or bw >= nyquist:
                raise InvalidProfile(f"formant at {freq} Hz is not below Nyquist ({nyquist} Hz)")
        if self.f0 >= nyquist:
            raise InvalidProfile(f"f0 {self.f0} Hz is not below Nyquist ({nyquist} Hz)")


def load_profiles(path=None) -> dict[VowelLabel, FormantProfile]:
    """Base vowel profiles from ``path`` or the packaged default table."""
    if path is None:
        text = resources.files("pcvc_vowels").joinpath("data/vowel_profiles.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    raw = json.loads(text)
    f0 = float(raw.get("f0", 120.0))
    profiles = {}
    for sym, formants in raw["vowels"].items():
        label = VowelLabel.parse(sym)
        profiles[label] = FormantProfile(f0, formants, label)
    missing = [v.value for v in VOWELS if v not in profiles]
    if missing:
        raise InvalidProfile(f"profile table lacks vowels {missing}")
    return profiles


def _resonator(freq: float, bw: float, sample_rate: int):
    """Two-pole resonator with unity gain at DC."""
    c = -np.exp(-2.0 * np.pi * bw / sample_rate)
    b = 2.0 * np.exp(-np.pi * bw / sample_rate) * np.cos(2.0 * np.pi * freq / sample_rate)
    a = 1.0 - b - c
    return np.array([a]), np.array([1.0, -b, -c])


def raised_cosine_fade(x: np.ndarray, fade_samples: int) -> np.ndarray:
    n = min(fade_samples, x.size // 2)
    if n <= 0:
        return x
    ramp = 0.5 - 0.5 * np.cos(np.pi * (np.arange(n) + 0.5) / n)
    out = x.copy()
    out[:n] *= ramp
    out[-n:] *= ramp[::-1]
    return out


def synth_vowel(profile: FormantProfile, duration: float, sample_rate: int = DEFAULT_SAMPLE_RATE,
                seed: int = 0) -> AudioClip:
    """Impulse train at f0 through parallel formant resonators.

    The seed only sets the phase of the pulse train. Output is
    peak-normalised to 0.5 with 10 ms raised-cosine fades at both ends.
    """
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    profile.check_rate(sample_rate)
    n = int(round(duration * sample_rate))
    rng = np.random.default_rng(seed)
    period = sample_rate / profile.f0
    phase = rng.uniform(0.0, min(period, n))
    pulses = np.zeros(n)
    idx = np.round(phase + period * np.arange(int((n - phase) // period) + 1)).astype(int)
    pulses[idx[idx < n]] = 1.0

    y = np.zeros(n)
    for freq, bw, amp in profile.formants:
        b, a = _resonator(freq, bw, sample_rate)
        y += amp * signal.lfilter(b, a, pulses)
    peak = np.max(np.abs(y))
    if peak > 0:
        y *= VOWEL_PEAK / peak
    y = raised_cosine_fade(y, int(round(FADE_MS * sample_rate / 1000.0)))
    return AudioClip(y, sample_rate)


@dataclass(frozen=True)
class CvLayout:
    """Timing of one consonant-vowel clip, in seconds."""

    duration: float = 2.0
    lead_silence: float = 0.25
    lead_jitter: float = 0.2
    gap: float = 0.04
    vowel_duration: float = 0.35
    vowel_jitter: float = 0.05
    noise_amplitude: float = 0.001
    consonant_peak: float = 0.2

    def validate(self) -> None:
        if self.lead_silence < 0.25:
            raise InvalidLayout(f"lead silence {self.lead_silence}s is shorter than 0.25s")
        if self.noise_amplitude < 0 or self.noise_amplitude > 0.002:
            raise InvalidLayout("noise amplitude must lie in [0, 0.002]")
        if not 0 < self.consonant_peak <= 0.25:
            raise InvalidLayout("consonant peak must lie in (0, 0.25]")
        if min(self.lead_jitter, self.gap, self.vowel_jitter) < 0 or self.vowel_duration <= 0:
            raise InvalidLayout("negative timing component")
        worst = (self.lead_silence + self.lead_jitter + CONSONANT_MAX_S + self.gap
                 + self.vowel_duration + self.vowel_jitter)
        if worst > self.duration:
            raise InvalidLayout(f"segments need up to {worst:.3f}s but the clip is {self.duration}s")


CONSONANT_MIN_S = 0.06
CONSONANT_MAX_S = 0.12
# stops get a closure followed by a short release burst; the rest are frication noise
_STOPS = {"P", "B", "T", "D", "tʃ", "dʒ", "K", "G", "Q"}


@dataclass(frozen=True)
class ConsonantSurrogate:
    duration: float
    centre_hz: float
    stop: bool


def consonant_surrogate(consonant_id: int) -> ConsonantSurrogate:
    if not 0 <= consonant_id < len(CONSONANTS):
        raise ValueError(f"consonant id {consonant_id} outside 0..{len(CONSONANTS) - 1}")
    duration = CONSONANT_MIN_S + (consonant_id * 37 % 61) / 1000.0
    centre = 500.0 + (consonant_id * 1319) % 5500
    return ConsonantSurrogate(duration, centre, CONSONANTS[consonant_id] in _STOPS)


@dataclass(frozen=True)
class CvPlan:
    """Sample boundaries of the parts of one clip; ends are exclusive."""

    n_samples: int
    consonant_start: int
    consonant_end: int
    vowel_start: int
    vowel_end: int

    @property
    def vowel_interval(self) -> tuple[int, int]:
        return self.vowel_start, self.vowel_end


def _streams(seed: int, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def cv_sample_plan(consonant_id: int, layout: CvLayout = CvLayout(), sample_rate: int = DEFAULT_SAMPLE_RATE,
                   seed: int = 0) -> CvPlan:
    """Where :func:`synth_cv_sample` puts the consonant and vowel for these arguments."""
    layout.validate()
    cons = consonant_surrogate(consonant_id)
    timing = _streams(seed, 4)[0]
    lead = layout.lead_silence + timing.uniform(0.0, layout.lead_jitter)
    vowel = layout.vowel_duration + timing.uniform(-layout.vowel_jitter, layout.vowel_jitter)
    sr = sample_rate
    c0 = int(round(lead * sr))
    c1 = c0 + int(round(cons.duration * sr))
    v0 = c1 + int(round(layout.gap * sr))
    v1 = v0 + int(round(vowel * sr))
    n = int(round(layout.duration * sr))
    if v1 > n:
        raise InvalidLayout("segments exceed the clip duration")
    return CvPlan(n, c0, c1, v0, v1)


def _consonant_burst(cons: ConsonantSurrogate, n: int, sample_rate: int, peak: float, rng) -> np.ndarray:
    nyquist = sample_rate / 2.0
    centre = min(cons.centre_hz, 0.8 * nyquist)
    lo, hi = centre * 0.75, min(centre * 1.25, 0.95 * nyquist)
    sos = signal.butter(2, [lo, hi], btype="bandpass", fs=sample_rate, output="sos")
    out = np.zeros(n)
    burst_n = n if not cons.stop else max(1, int(round(0.02 * sample_rate)))
    noise = signal.sosfilt(sos, rng.standard_normal(burst_n + 256))[256:]
    noise = raised_cosine_fade(noise, int(round(0.005 * sample_rate)))
    m = np.max(np.abs(noise))
    if m > 0:
        noise *= peak / m
    out[n - burst_n:] = noise
    return out


def synth_cv_sample(consonant_id: int, profile: FormantProfile, layout: CvLayout = CvLayout(),
                    sample_rate: int = DEFAULT_SAMPLE_RATE, seed: int = 0) -> AudioClip:
    """One PCVC-shaped clip. Ground truth boundaries come from :func:`cv_sample_plan`."""
    plan = cv_sample_plan(consonant_id, layout, sample_rate, seed)
    _, noise_rng, burst_rng, vowel_rng = _streams(seed, 4)
    x = noise_rng.uniform(-layout.noise_amplitude, layout.noise_amplitude, plan.n_samples)
    cons = consonant_surrogate(consonant_id)
    x[plan.consonant_start:plan.consonant_end] += _consonant_burst(
        cons, plan.consonant_end - plan.consonant_start, sample_rate, layout.consonant_peak, burst_rng)
    vowel = synth_vowel(profile, (plan.vowel_end - plan.vowel_start) / sample_rate, sample_rate,
                        int(vowel_rng.integers(2**31)))
    x[plan.vowel_start:plan.vowel_end] += vowel.samples
    return AudioClip(np.clip(x, -1.0, 1.0), sample_rate)


@dataclass(frozen=True)
class Speaker:
    id: str
    sex: str
    f0: float
    formant_scale: float


@dataclass
class CorpusConfig:
    n_speakers: int = 10
    seed: int = 0
    sample_rate: int = DEFAULT_SAMPLE_RATE
    consonants: list[int] | None = None  # consonant ids; None = all 23
    layout: CvLayout = field(default_factory=CvLayout)
    profiles_path: str | None = None
    bit_depth: int = 16


def make_speakers(n: int, seed: int) -> list[Speaker]:
    """Alternating male/female speakers with distinct f0 and a vocal-tract scale within +-6%."""
    speakers = []
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 1, i]))
        sex = "m" if i % 2 == 0 else "f"
        base = 100.0 + 8.0 * (i // 2) if sex == "m" else 190.0 + 10.0 * (i // 2)
        f0 = base + rng.uniform(-2.0, 2.0)
        scale = 1.0 + rng.uniform(-0.06, 0.06)
        speakers.append(Speaker(f"spk{i + 1:02d}", sex, round(f0, 3), round(scale, 5)))
    return speakers


def sample_profile(base: FormantProfile, speaker: Speaker, rng) -> FormantProfile:
    """Per-utterance variant: speaker scale times +-1.5% per formant, f0 +-3%."""
    jitter = 1.0 + rng.uniform(-0.015, 0.015, len(base.formants))
    scales = np.clip(speaker.formant_scale * jitter, 0.92, 1.08)
    f0 = speaker.f0 * (1.0 + rng.uniform(-0.03, 0.03))
    return FormantProfile(f0, tuple((f * s, bw, a) for (f, bw, a), s in zip(base.formants, scales)), base.label)


def generate_corpus(config: CorpusConfig, out_dir) -> Manifest:
    """Write one WAV per (speaker, consonant, vowel) plus ``manifest.csv``/``manifest.json``."""
    if config.n_speakers < 1:
        raise ValueError("need at least one speaker")
    config.layout.validate()
    out = Path(out_dir)
    profiles = load_profiles(config.profiles_path)
    for p in profiles.values():
        p.check_rate(config.sample_rate)
    consonant_ids = list(range(len(CONSONANTS))) if config.consonants is None else list(config.consonants)
    speakers = make_speakers(config.n_speakers, config.seed)

    entries = []
    try:
        for si, spk in enumerate(speakers):
            (out / "wav" / spk.id).mkdir(parents=True, exist_ok=True)
            for ci in consonant_ids:
                for vowel in VOWELS:
                    ss = np.random.SeedSequence([config.seed, 2, si, ci, vowel.index])
                    rng = np.random.default_rng(ss)
                    profile = sample_profile(profiles[vowel], spk, rng)
                    clip = synth_cv_sample(ci, profile, config.layout, config.sample_rate,
                                           int(rng.integers(2**31)))
                    rel = f"wav/{spk.id}/{spk.id}_c{ci:02d}_{vowel.ascii}.wav"
                    write_wav(clip, out / rel, config.bit_depth)
                    entries.append(ManifestEntry(rel, spk.id, CONSONANTS[ci], vowel))
    except OSError as exc:
        raise IoFailure(f"cannot write corpus under {out}: {exc}") from exc

    metadata = {
        "sample_rate": config.sample_rate,
        "duration_s": config.layout.duration,
        "seed": config.seed,
        "generator_version": GENERATOR_VERSION,
        "speakers": [{"id": s.id, "sex": s.sex, "f0": s.f0, "formant_scale": s.formant_scale} for s in speakers],
    }
    manifest = Manifest(entries, metadata, out)
    write_manifest(manifest, out / "manifest.csv")
    return manifest

