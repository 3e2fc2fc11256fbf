"""Mono PCM / IEEE-float WAV reading and writing.

Samples are held as float64 in [-1, 1]. 16-bit PCM is scaled by 1/32768 on
read; float32 data is taken as-is. Unknown RIFF chunks (LIST, fact, bext,
...) are skipped.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import InvalidClip, IoFailure, MalformedHeader, UnsupportedFormat

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

# trailing 14 bytes of the KSDATAFORMAT_SUBTYPE_* GUIDs
_GUID_TAIL = b"\x00\x00\x00\x00\x10\x00\x80\x00\x00\xaa\x00\x38\x9b\x71"


@dataclass(frozen=True)
class AudioClip:
    """Immutable mono sample buffer."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64).reshape(-1)
        if isinstance(self.sample_rate, bool) or int(self.sample_rate) != self.sample_rate:
            raise InvalidClip(f"sample rate must be an integer, got {self.sample_rate!r}")
        if self.sample_rate <= 0:
            raise InvalidClip(f"sample rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise InvalidClip("samples contain non-finite values")
        if samples.size and np.max(np.abs(samples)) > 1.0:
            raise InvalidClip("samples must lie in [-1, 1]")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> Fraction:
        return Fraction(self.samples.size, self.sample_rate)

    @property
    def duration_seconds(self) -> float:
        return self.samples.size / self.sample_rate

    def scaled(self, gain: float) -> "AudioClip":
        return AudioClip(self.samples * gain, self.sample_rate)


def _parse_fmt(body: bytes):
    if len(body) < 16:
        raise MalformedHeader("fmt chunk shorter than 16 bytes")
    code, channels, rate, _byte_rate, block_align, bits = struct.unpack("<HHIIHH", body[:16])
    if code == WAVE_FORMAT_EXTENSIBLE:
        if len(body) < 40:
            raise MalformedHeader("extensible fmt chunk shorter than 40 bytes")
        guid = body[24:40]
        if guid[2:] != _GUID_TAIL:
            raise UnsupportedFormat("unrecognised WAVE_FORMAT_EXTENSIBLE subformat")
        code = struct.unpack("<H", guid[:2])[0]
    if code not in (WAVE_FORMAT_PCM, WAVE_FORMAT_IEEE_FLOAT):
        raise UnsupportedFormat(f"format code {code:#06x} is not PCM or IEEE float")
    if channels != 1:
        raise UnsupportedFormat(f"expected 1 channel, file has {channels}")
    if code == WAVE_FORMAT_PCM and bits != 16:
        raise UnsupportedFormat(f"PCM bit depth {bits} not supported (16 only)")
    if code == WAVE_FORMAT_IEEE_FLOAT and bits != 32:
        raise UnsupportedFormat(f"float bit depth {bits} not supported (32 only)")
    if block_align != bits // 8:
        raise MalformedHeader(f"block align {block_align} inconsistent with {bits}-bit mono")
    if rate == 0:
        raise MalformedHeader("sample rate is zero")
    return code, rate


def parse_wav_bytes(data: bytes) -> AudioClip:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedHeader("not a RIFF/WAVE file")
    pos = 12
    fmt = None
    payload = None
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        size = struct.unpack("<I", data[pos + 4 : pos + 8])[0]
        body = data[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            if len(body) < size:
                raise MalformedHeader("truncated fmt chunk")
            fmt = _parse_fmt(body)
        elif chunk_id == b"data":
            if fmt is None:
                raise MalformedHeader("data chunk precedes fmt chunk")
            payload = body
            break
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise MalformedHeader("missing fmt chunk")
    if payload is None:
        raise MalformedHeader("missing data chunk")
    code, rate = fmt
    width = 2 if code == WAVE_FORMAT_PCM else 4
    if len(payload) % width:
        # a truncated file cuts the last sample in half
        raise MalformedHeader("data chunk length is not a whole number of samples")
    if code == WAVE_FORMAT_PCM:
        samples = np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32768.0
    else:
        samples = np.frombuffer(payload, dtype="<f4").astype(np.float64)
        if not np.all(np.isfinite(samples)):
            raise UnsupportedFormat("float data contains NaN or infinity")
        np.clip(samples, -1.0, 1.0, out=samples)
    return AudioClip(samples, rate)


def read_wav(path) -> AudioClip:
    """Read a mono 16-bit PCM or 32-bit float WAV file."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return parse_wav_bytes(data)


def wav_bytes(clip: AudioClip, bit_depth: int = 16) -> bytes:
    if bit_depth == 16:
        q = np.clip(np.round(clip.samples * 32768.0), -32768, 32767)
        payload = q.astype("<i2").tobytes()
        code = WAVE_FORMAT_PCM
    elif bit_depth == 32:
        payload = clip.samples.astype("<f4").tobytes()
        code = WAVE_FORMAT_IEEE_FLOAT
    else:
        raise UnsupportedFormat(f"bit depth must be 16 or 32, got {bit_depth}")
    width = bit_depth // 8
    fmt = struct.pack("<HHIIHH", code, 1, clip.sample_rate, clip.sample_rate * width, width, bit_depth)
    pad = b"\x00" if len(payload) & 1 else b""
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload + pad
    return b"RIFF" + struct.pack("<I", len(body)) + body


def write_wav(clip: AudioClip, path, bit_depth: int = 16) -> None:
    data = wav_bytes(clip, bit_depth)
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
