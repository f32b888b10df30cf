"""WAV decoding, mono mixdown, resampling, and duration normalization."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, InvariantError


class AudioIOError(DataError):
    pass


class UnreadableAudioError(AudioIOError):
    """File cannot be opened or read at all."""


class UnsupportedEncodingError(AudioIOError):
    """File is not a RIFF/WAVE container with PCM16 or IEEE float32 payload."""


class EmptyAudioError(AudioIOError):
    """WAV file decodes to zero frames."""


@dataclass
class AudioClip:
    """Mono waveform with amplitudes in [-1, 1] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        sid = self.source_id
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise InvariantError(f"clip {sid!r}: samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.samples)):
            raise InvariantError(f"clip {sid!r}: samples contain non-finite values")
        if np.max(np.abs(self.samples)) > 1.0:
            raise InvariantError(f"clip {sid!r}: samples outside [-1, 1]")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise InvariantError(f"clip {sid!r}: sample_rate must be a positive integer")
        self.sample_rate = int(self.sample_rate)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def load_audio(path) -> AudioClip:
    """Decode a RIFF/WAVE file into a normalized mono clip.

    Accepts PCM 16-bit integer or IEEE 32-bit float payloads, any channel
    count, any rate.  Multichannel audio is averaged with equal weights and
    the result re-clamped to [-1, 1]; integer PCM is scaled by 1/32768.
    """
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise UnreadableAudioError(f"cannot read audio file: {p}") from exc
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise UnsupportedEncodingError(f"unsupported encoding (not RIFF/WAVE): {p}")

    fmt_chunk = None
    data_chunk = None
    off = 12
    while off + 8 <= len(raw):
        cid = raw[off : off + 4]
        (size,) = struct.unpack_from("<I", raw, off + 4)
        off += 8
        chunk = raw[off : off + size]
        if len(chunk) < size:
            raise UnsupportedEncodingError(f"unsupported encoding (truncated chunk): {p}")
        if cid == b"fmt ":
            fmt_chunk = chunk
        elif cid == b"data":
            data_chunk = chunk
        off += size + (size & 1)  # chunks are word-aligned
    if fmt_chunk is None or data_chunk is None:
        raise UnsupportedEncodingError(f"unsupported encoding (missing fmt/data chunk): {p}")
    if len(fmt_chunk) < 16:
        raise UnsupportedEncodingError(f"unsupported encoding (short fmt chunk): {p}")

    fmt_code, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt_chunk, 0)
    if channels < 1 or rate < 1:
        raise UnsupportedEncodingError(f"unsupported encoding (bad fmt fields): {p}")
    if fmt_code == 1 and bits == 16:
        dtype = "<i2"
    elif fmt_code == 3 and bits == 32:
        dtype = "<f4"
    else:
        raise UnsupportedEncodingError(
            f"unsupported encoding (format={fmt_code}, bits={bits}): {p}"
        )

    bytes_per_frame = (bits // 8) * channels
    frames = len(data_chunk) // bytes_per_frame
    if frames == 0:
        raise EmptyAudioError(f"zero-length audio: {p}")
    if frames * bytes_per_frame != len(data_chunk):
        raise UnsupportedEncodingError(f"unsupported encoding (partial frame): {p}")

    x = np.frombuffer(data_chunk, dtype=dtype).astype(np.float64)
    x = x.reshape(frames, channels).mean(axis=1)
    if dtype == "<i2":
        x /= 32768.0
    np.clip(x, -1.0, 1.0, out=x)
    return AudioClip(x, int(rate), source_id=p.stem)


def save_wav(path, samples, sample_rate: int, encoding: str = "float32") -> None:
    """Write a mono WAV file (PCM16 or IEEE float32)."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    if encoding == "pcm16":
        payload = np.clip(np.rint(x * 32768.0), -32768, 32767).astype("<i2").tobytes()
        fmt_code, bits = 1, 16
    elif encoding == "float32":
        payload = x.astype("<f4").tobytes()
        fmt_code, bits = 3, 32
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    block_align = bits // 8
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, fmt_code, 1, sample_rate, sample_rate * block_align, block_align, bits
    )
    header += b"data" + struct.pack("<I", len(payload))
    Path(path).write_bytes(header + payload)


# Windowed-sinc interpolation kernel: 64 taps, Kaiser window, beta = 8.
_TAPS = 64
_HALF = _TAPS // 2
_KAISER_BETA = 8.0
_OFFSETS = np.arange(-_HALF + 1, _HALF + 1)
_CHUNK = 1 << 16


def _kaiser(v: np.ndarray) -> np.ndarray:
    v = np.clip(v, -1.0, 1.0)
    return np.i0(_KAISER_BETA * np.sqrt(1.0 - v * v)) / np.i0(_KAISER_BETA)


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Resample a clip with a 64-tap Kaiser-windowed sinc interpolator.

    The same rate returns the input unchanged.  Each output sample's tap
    weights are normalized to unit sum, so constant signals pass through
    exactly and passband gain stays flat.
    """
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    target_rate = int(target_rate)
    if target_rate == clip.sample_rate:
        return clip

    x = clip.samples
    ratio = target_rate / clip.sample_rate
    n_out = max(1, int(round(x.size * ratio)))
    cutoff = min(1.0, ratio)  # relative to the input Nyquist
    padded = np.concatenate([np.zeros(_HALF), x, np.zeros(_HALF + 1)])

    out = np.empty(n_out)
    for start in range(0, n_out, _CHUNK):
        j = np.arange(start, min(start + _CHUNK, n_out))
        t = j / ratio
        base = np.floor(t).astype(np.int64)
        frac = t - base
        u = _OFFSETS[None, :] - frac[:, None]
        w = cutoff * np.sinc(cutoff * u) * _kaiser(u / _HALF)
        w /= w.sum(axis=1, keepdims=True)
        idx = base[:, None] + _OFFSETS[None, :] + _HALF
        out[j] = np.einsum("bt,bt->b", w, padded[idx])

    np.clip(out, -1.0, 1.0, out=out)
    return AudioClip(out, target_rate, clip.source_id)


def fix_duration(clip: AudioClip, seconds: float) -> AudioClip:
    """Truncate or zero-pad a clip to exactly `seconds` at its current rate."""
    target = int(round(seconds * clip.sample_rate))
    if target < 1:
        raise ValueError("duration too short for the sample rate")
    n = clip.samples.size
    if n == target:
        return clip
    if n > target:
        samples = clip.samples[:target].copy()
    else:
        samples = np.concatenate([clip.samples, np.zeros(target - n)])
    return AudioClip(samples, clip.sample_rate, clip.source_id)
