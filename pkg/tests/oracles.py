"""Independent oracles the test suite checks the package against.

Everything here is deliberately brute-force or closed-form and shares no
code with the implementation paths it validates.
"""

import itertools
from functools import lru_cache

import numpy as np
from scipy import signal as sps


def collapse_path(path, blank):
    """CTC path collapse: merge adjacent repeats, then drop blanks."""
    out = []
    prev = None
    for s in path:
        if s != prev:
            out.append(s)
        prev = s
    return tuple(s for s in out if s != blank)


def ctc_loss_brute_force(logits, label, blank):
    """-log P(label) by enumerating every frame-level path (V^T of them)."""
    logits = np.asarray(logits, dtype=np.float64)
    t_frames, vocab = logits.shape
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    target = tuple(label)
    total = 0.0
    for path in itertools.product(range(vocab), repeat=t_frames):
        if collapse_path(path, blank) == target:
            p = 1.0
            for t, s in enumerate(path):
                p *= probs[t, s]
            total += p
    return -np.log(total) if total > 0 else np.inf


def ctc_grad_fd(logits, label, blank, loss_fn, eps=1e-5):
    """Central finite differences of a (loss, grad)-returning ctc loss."""
    logits = np.asarray(logits, dtype=np.float64)
    grad = np.zeros_like(logits)
    for idx in np.ndindex(logits.shape):
        bumped = logits.copy()
        bumped[idx] += eps
        hi, _ = loss_fn(bumped, label, blank)
        bumped[idx] -= 2 * eps
        lo, _ = loss_fn(bumped, label, blank)
        grad[idx] = (hi - lo) / (2 * eps)
    return grad


def edit_distance_recursive(a, b):
    """Memoized recursive Levenshtein distance (no DP table shared with
    the implementation)."""

    @lru_cache(maxsize=None)
    def rec(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        same = a[i - 1] == b[j - 1]
        return min(
            rec(i - 1, j - 1) + (0 if same else 1),
            rec(i - 1, j) + 1,
            rec(i, j - 1) + 1,
        )

    result = rec(len(a), len(b))
    rec.cache_clear()
    return result


def fft_peak_hz(samples, sample_rate):
    """Frequency of the largest rFFT magnitude bin."""
    spec = np.abs(np.fft.rfft(np.asarray(samples, dtype=np.float64)))
    freqs = np.fft.rfftfreq(len(samples), 1.0 / sample_rate)
    return freqs[int(np.argmax(spec))]


def synth_vowel(formants_hz, duration_s, sample_rate, f0_hz=100.0,
                bandwidths_hz=None, amplitude=0.3, seed=0):
    """Impulse-train excitation through cascaded two-pole resonators.

    Returns a float32 array normalized to the requested peak amplitude.
    The resonator centers are ground truth for formant-tracking tests.
    """
    n = int(duration_s * sample_rate)
    period = int(round(sample_rate / f0_hz))
    x = np.zeros(n)
    x[::period] = 1.0
    if bandwidths_hz is None:
        bandwidths_hz = [80.0 + 20.0 * i for i in range(len(formants_hz))]
    y = x
    for fc, bw in zip(formants_hz, bandwidths_hz):
        r = np.exp(-np.pi * bw / sample_rate)
        theta = 2.0 * np.pi * fc / sample_rate
        b = [1.0 - r]
        a = [1.0, -2.0 * r * np.cos(theta), r * r]
        y = sps.lfilter(b, a, y)
    peak = np.abs(y).max()
    if peak > 0:
        y = y * (amplitude / peak)
    return y.astype(np.float32)


def speechlike_signal(duration_s, sample_rate, seed):
    """Broadband noise gated by deep, aperiodic syllable-rate bursts: a
    stand-in for speech when testing envelope-carrying augmentations."""
    rng = np.random.default_rng(seed)
    n = int(duration_s * sample_rate)
    carrier = rng.standard_normal(n)
    sos = sps.butter(2, 3.0 / (sample_rate / 2), output="sos")
    slow = sps.sosfiltfilt(sos, rng.standard_normal(n), padlen=min(n - 1, sample_rate))
    bursts = np.maximum(slow, 0.0)
    bursts /= bursts.max() + 1e-12
    mod = 0.03 + bursts**1.5
    out = carrier * mod
    return (0.25 * out / np.abs(out).max()).astype(np.float32)
