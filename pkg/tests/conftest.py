import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from jointasr.audio import Waveform

SR = 16000


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def tone(freq_hz, duration_s=1.0, amplitude=0.5, sr=SR):
    t = np.arange(int(duration_s * sr)) / sr
    return Waveform(amplitude * np.sin(2 * np.pi * freq_hz * t), sr)


def noise_wave(duration_s=1.0, amplitude=0.1, sr=SR, seed=0):
    r = np.random.default_rng(seed)
    return Waveform(amplitude * r.standard_normal(int(duration_s * sr)), sr)
