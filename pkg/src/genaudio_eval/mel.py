"""Log-mel spectrograms: filterbank construction, STFT analysis, MEL1 file I/O.

The log-mel matrix is the domain every corruption operates on, so this module
pins the exact conventions: Hann window, power spectrum, triangular mel
filters scaled to unit peak, natural log with a positive floor.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .audio_io import AudioClip
from .errors import DataError, InvariantError


class MelConfigError(InvariantError):
    pass


class ClipTooShortError(DataError):
    pass


class MelFormatError(DataError):
    """Malformed MEL1 file."""


_MEL1_MAGIC = b"MEL1"

# Tolerance for the floor invariant; covers float32 round-trips through MEL1.
_FLOOR_SLACK = 1e-5


@dataclass(frozen=True)
class MelConfig:
    """STFT / mel-filterbank analysis parameters."""

    n_fft: int = 1024
    hop: int = 160
    n_mels: int = 64
    f_min: float = 0.0
    f_max: float = 8000.0
    log_floor: float = 1e-10

    def __post_init__(self):
        if not (0 < self.hop <= self.n_fft):
            raise MelConfigError("require 0 < hop <= n_fft")
        if self.n_mels < 1:
            raise MelConfigError("n_mels must be >= 1")
        if not (0.0 <= self.f_min < self.f_max):
            raise MelConfigError("require 0 <= f_min < f_max")
        if self.log_floor <= 0.0:
            raise MelConfigError("log_floor must be positive")


@dataclass
class MelSpectrogram:
    """T x M matrix of log-power mel energies."""

    values: np.ndarray
    config: MelConfig
    source_id: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        sid = self.source_id
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise InvariantError(f"mel {sid!r}: values must be a T x M matrix with T >= 1")
        if self.values.shape[1] != self.config.n_mels:
            raise InvariantError(
                f"mel {sid!r}: {self.values.shape[1]} bands but config says {self.config.n_mels}"
            )
        if not np.all(np.isfinite(self.values)):
            raise InvariantError(f"mel {sid!r}: non-finite entries")
        floor = np.log(self.config.log_floor)
        if self.values.min() < floor - _FLOOR_SLACK:
            raise InvariantError(f"mel {sid!r}: entries below the log floor {floor:.6f}")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def floor_value(self) -> float:
        return float(np.log(self.config.log_floor))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_freqs(config: MelConfig) -> np.ndarray:
    """Center frequency (Hz) of each triangular filter."""
    pts = mel_to_hz(np.linspace(hz_to_mel(config.f_min), hz_to_mel(config.f_max), config.n_mels + 2))
    return pts[1:-1]


@lru_cache(maxsize=32)
def _filterbank_cached(config: MelConfig, sample_rate: int) -> np.ndarray:
    n_bins = config.n_fft // 2 + 1
    freqs = np.arange(n_bins) * sample_rate / config.n_fft
    pts = mel_to_hz(np.linspace(hz_to_mel(config.f_min), hz_to_mel(config.f_max), config.n_mels + 2))
    fb = np.zeros((config.n_mels, n_bins))
    for i in range(config.n_mels):
        lo, center, hi = pts[i], pts[i + 1], pts[i + 2]
        rising = (freqs - lo) / (center - lo)
        falling = (hi - freqs) / (hi - center)
        tri = np.clip(np.minimum(rising, falling), 0.0, None)
        peak = tri.max()
        if peak <= 0.0:
            raise MelConfigError(
                f"mel filter {i} holds no FFT bin; config too narrow for n_fft={config.n_fft}"
            )
        fb[i] = tri / peak  # unit peak per filter
    fb.setflags(write=False)
    return fb


def mel_filterbank(config: MelConfig, sample_rate: int) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mels, n_fft/2 + 1), read-only."""
    if config.f_max > sample_rate / 2:
        raise MelConfigError(f"f_max={config.f_max} exceeds Nyquist for rate {sample_rate}")
    return _filterbank_cached(config, int(sample_rate))


def _hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def mel_spectrogram(clip: AudioClip, config: MelConfig | None = None) -> MelSpectrogram:
    """Compute the log-power mel spectrogram of a clip.

    Frames are Hann-windowed with no centering, so T = 1 + (len - n_fft) // hop.
    Mel power below `log_floor` is clamped before the natural log.
    """
    cfg = config if config is not None else MelConfig()
    fb = mel_filterbank(cfg, clip.sample_rate)
    x = clip.samples
    if x.size < cfg.n_fft:
        raise ClipTooShortError(
            f"clip {clip.source_id!r}: {x.size} samples < one window of {cfg.n_fft}"
        )
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.n_fft)[:: cfg.hop]
    spectrum = np.abs(np.fft.rfft(frames * _hann(cfg.n_fft), axis=1)) ** 2
    power = spectrum @ fb.T
    values = np.log(np.maximum(power, cfg.log_floor))
    return MelSpectrogram(values, cfg, clip.source_id)


def save_mel(path, mel: MelSpectrogram) -> None:
    """Dump a mel matrix in the MEL1 binary format.

    Layout: magic "MEL1", u32 T, u32 M, then T*M little-endian float32 values
    row-major.  Config and source id are not stored.
    """
    t, m = mel.values.shape
    header = _MEL1_MAGIC + struct.pack("<II", t, m)
    Path(path).write_bytes(header + mel.values.astype("<f4").tobytes())


def load_mel(path, config: MelConfig | None = None, source_id: str | None = None) -> MelSpectrogram:
    """Read a MEL1 file back into a MelSpectrogram.

    When `config` is omitted a default config is synthesized from the stored
    band count, widening the log floor if the data requires it.
    """
    p = Path(path)
    raw = p.read_bytes()
    if len(raw) < 12 or raw[:4] != _MEL1_MAGIC:
        raise MelFormatError(f"bad magic (expected MEL1): {p}")
    t, m = struct.unpack_from("<II", raw, 4)
    expected = 12 + 4 * t * m
    if len(raw) < expected:
        raise MelFormatError(f"truncated payload ({len(raw)} bytes, need {expected}): {p}")
    values = np.frombuffer(raw, dtype="<f4", count=t * m, offset=12).astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise MelFormatError(f"non-finite values: {p}")
    values = values.reshape(t, m)
    cfg = config
    if cfg is None:
        cfg = MelConfig(n_mels=m)
        vmin = float(values.min())
        if vmin < np.log(cfg.log_floor):
            cfg = replace(cfg, log_floor=float(np.exp(vmin)) * 0.999)
    sid = source_id if source_id is not None else p.name.removesuffix(".mel1")
    return MelSpectrogram(values, cfg, sid)
