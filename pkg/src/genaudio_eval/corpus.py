"""Synthetic WAV corpora for protocol tests and demos.

The bundled evaluation corpus is 20 clips: 10 pure tones spread over the
usable band and 10 band-filtered noise bursts.  A separate pool of
out-of-corpus clips (chirps and off-band noise) serves as interference
material.  All generation is seeded and writes float32 WAV files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .audio_io import save_wav


def tone(freq: float, seconds: float, rate: int, amplitude: float = 0.5) -> np.ndarray:
    t = np.arange(int(round(seconds * rate))) / rate
    return amplitude * np.sin(2.0 * np.pi * freq * t)


def filtered_noise(rng: np.random.Generator, band: tuple[float, float], seconds: float,
                   rate: int, amplitude: float = 0.5) -> np.ndarray:
    """White noise band-passed in the frequency domain, peak-normalized."""
    n = int(round(seconds * rate))
    x = rng.standard_normal(n)
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, d=1.0 / rate)
    spec[(freqs < band[0]) | (freqs > band[1])] = 0.0
    y = np.fft.irfft(spec, n)
    peak = np.abs(y).max()
    if peak > 0:
        y = y / peak * amplitude
    return y


def chirp(f0: float, f1: float, seconds: float, rate: int, amplitude: float = 0.5) -> np.ndarray:
    t = np.arange(int(round(seconds * rate))) / rate
    phase = 2.0 * np.pi * (f0 * t + 0.5 * (f1 - f0) / seconds * t * t)
    return amplitude * np.sin(phase)


def write_synthetic_corpus(out_dir, n_clips: int = 20, seed: int = 0,
                           sample_rate: int = 16000, seconds: float = 10.0) -> list[Path]:
    """Write the bundled tones-plus-filtered-noise corpus; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n_tones = n_clips // 2
    n_noise = n_clips - n_tones
    paths = []
    freqs = np.geomspace(220.0, 3520.0, max(n_tones, 1))
    for i in range(n_tones):
        amp = 0.3 + 0.4 * (i % 3) / 2.0
        path = out / f"tone_{i:02d}.wav"
        save_wav(path, tone(float(freqs[i]), seconds, sample_rate, amp), sample_rate)
        paths.append(path)
    edges = np.geomspace(150.0, min(6000.0, sample_rate / 2 * 0.9), n_noise + 1)
    for i in range(n_noise):
        band = (float(edges[i]), float(edges[i + 1]))
        path = out / f"noise_{i:02d}.wav"
        save_wav(path, filtered_noise(rng, band, seconds, sample_rate, 0.4), sample_rate)
        paths.append(path)
    return paths


def write_interferer_pool(out_dir, n_clips: int = 10, seed: int = 1,
                          sample_rate: int = 16000, seconds: float = 10.0) -> list[Path]:
    """Write out-of-corpus interference clips (chirps and high-band noise)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(n_clips):
        path = out / f"interferer_{i:02d}.wav"
        if i % 2 == 0:
            f0 = 300.0 * (1 + i)
            x = chirp(f0, f0 * 2.5, seconds, sample_rate, 0.45)
        else:
            lo = 400.0 + 500.0 * i
            x = filtered_noise(rng, (lo, lo + 800.0), seconds, sample_rate, 0.45)
        save_wav(path, x, sample_rate)
        paths.append(path)
    return paths
