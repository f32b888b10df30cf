import numpy as np
import pytest

from genaudio_eval.audio_io import AudioClip


@pytest.fixture
def make_tone():
    def _make(freq=1000.0, seconds=1.0, rate=16000, amplitude=0.5, source_id="tone"):
        t = np.arange(int(round(seconds * rate))) / rate
        return AudioClip(amplitude * np.sin(2 * np.pi * freq * t), rate, source_id)

    return _make


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
