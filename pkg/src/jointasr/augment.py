"""Adversarial listening conditions: babble mixing at exact SNR, 8-talker
babble construction, noise-vocoded speech, and sine-wave speech."""

import math
from dataclasses import dataclass, field

import numpy as np

from .audio import BandSpec, Waveform, bandpass_bank, envelope, formant_tracks, rms

BABBLE_TALKERS = 8
BABBLE_TALKER_RMS = 0.1
VOCODE_LOW_HZ = 80.0
VOCODE_HIGH_HZ = 7600.0
MIN_AUGMENT_MS = 50.0


@dataclass
class SnrSpec:
    """Target signal-to-noise ratio in dB; +inf means pass-through."""

    snr_db: float

    def __post_init__(self):
        v = float(self.snr_db)
        if not math.isinf(v) and not (-60.0 <= v <= 60.0):
            raise ValueError(f"snr {v} dB outside the sane range [-60, 60]")
        if math.isinf(v) and v < 0:
            raise ValueError("-inf SNR is not a condition")
        self.snr_db = v

    @property
    def is_clean(self) -> bool:
        return math.isinf(self.snr_db)


@dataclass
class VocodeSpec:
    """Channel vocoder layout: n log-spaced bands over [80, 7600] Hz."""

    n_channels: int
    band_low_hz: float = VOCODE_LOW_HZ
    band_high_hz: float = VOCODE_HIGH_HZ

    def __post_init__(self):
        if self.n_channels < 1:
            raise ValueError("need at least one vocoder channel")
        if not (0.0 < self.band_low_hz < self.band_high_hz):
            raise ValueError("band edges must be strictly increasing")

    def band_edges(self) -> np.ndarray:
        return np.geomspace(self.band_low_hz, self.band_high_hz, self.n_channels + 1)

    def bands(self):
        edges = self.band_edges()
        return [BandSpec(edges[i], edges[i + 1]) for i in range(self.n_channels)]


@dataclass
class MixResult:
    """Output of mix_at_snr plus the bookkeeping the SNR contract needs."""

    waveform: Waveform
    noise_gain: float
    peak_scale: float = 1.0
    signal_part: np.ndarray = field(default=None, repr=False)
    noise_part: np.ndarray = field(default=None, repr=False)


def _loop_to_length(x: np.ndarray, n: int) -> np.ndarray:
    if x.shape[0] >= n:
        return x[:n]
    reps = int(np.ceil(n / x.shape[0]))
    return np.tile(x, reps)[:n]


def mix_at_snr(signal: Waveform, noise: Waveform, snr: SnrSpec) -> MixResult:
    """Mix noise into signal at an exact component SNR.

    The noise is looped or truncated to the signal length and scaled by
    g = (rms(signal) / rms(noise)) * 10^(-snr_db / 20). The mix is only
    rescaled (never hard-clipped) when it exceeds full scale, and the
    rescale factor is recorded, so the component SNR stays exact.
    """
    if rms(signal) == 0.0:
        raise ValueError("cannot set an SNR against a silent signal")
    if snr.is_clean:
        return MixResult(
            Waveform(signal.samples.copy(), signal.sample_rate),
            noise_gain=0.0,
            signal_part=signal.samples.astype(np.float64),
            noise_part=np.zeros(len(signal)),
        )
    if noise.sample_rate != signal.sample_rate:
        raise ValueError(
            f"sample rate mismatch: signal {signal.sample_rate}, noise {noise.sample_rate}"
        )
    if rms(noise) == 0.0:
        raise ValueError("noise is silent; only snr=+inf allows that")

    sig = signal.samples.astype(np.float64)
    noi = _loop_to_length(noise.samples.astype(np.float64), len(signal))
    noise_rms = np.sqrt(np.mean(noi**2))
    gain = (np.sqrt(np.mean(sig**2)) / noise_rms) * 10.0 ** (-snr.snr_db / 20.0)
    scaled = gain * noi
    mix = sig + scaled

    peak_scale = 1.0
    peak = np.abs(mix).max(initial=0.0)
    if peak > 1.0:
        peak_scale = 1.0 / peak
        mix = mix * peak_scale
    return MixResult(
        Waveform(mix.astype(np.float32), signal.sample_rate),
        noise_gain=float(gain),
        peak_scale=float(peak_scale),
        signal_part=sig,
        noise_part=scaled,
    )


def make_babble(utterances) -> Waveform:
    """Sum 8 talkers into babble noise.

    Each utterance is RMS-normalized to 0.1, looped or truncated to the
    longest one, summed, and the sum is renormalized back to RMS 0.1.
    """
    if len(utterances) != BABBLE_TALKERS:
        raise ValueError(f"babble needs exactly {BABBLE_TALKERS} talkers, got {len(utterances)}")
    rates = {u.sample_rate for u in utterances}
    if len(rates) != 1:
        raise ValueError("all babble talkers must share one sample rate")
    target_len = max(len(u) for u in utterances)
    acc = np.zeros(target_len)
    for u in utterances:
        level = rms(u)
        if level == 0.0:
            raise ValueError("a silent talker cannot contribute to babble")
        x = _loop_to_length(u.samples.astype(np.float64), target_len)
        acc += x * (BABBLE_TALKER_RMS / level)
    total = np.sqrt(np.mean(acc**2))
    acc *= BABBLE_TALKER_RMS / total
    return Waveform(acc.astype(np.float32), rates.pop())


def _require_min_length(w: Waveform):
    if len(w) < int(w.sample_rate * MIN_AUGMENT_MS / 1000.0):
        raise ValueError(f"augmentation needs at least {MIN_AUGMENT_MS:.0f} ms of audio")


def noise_vocode(w: Waveform, spec: VocodeSpec, rng_seed: int) -> Waveform:
    """Replace each band's fine structure with seeded Gaussian noise.

    The input is split into the spec's log-spaced bands; per band, the
    band's amplitude envelope modulates RMS-normalized band-limited noise.
    Bands are summed and the result is renormalized to the input RMS.
    """
    _require_min_length(w)
    in_rms = rms(w)
    if in_rms == 0.0:
        return Waveform(np.zeros(len(w), dtype=np.float32), w.sample_rate)

    rng = np.random.default_rng(rng_seed)
    carrier = Waveform(
        rng.standard_normal(len(w)).astype(np.float32) * 0.05, w.sample_rate
    )
    bands = spec.bands()
    speech_bands = bandpass_bank(w, bands)
    noise_bands = bandpass_bank(carrier, bands)

    acc = np.zeros(len(w))
    for speech_band, noise_band in zip(speech_bands, noise_bands):
        env = envelope(speech_band).samples.astype(np.float64)
        nb = noise_band.samples.astype(np.float64)
        nb_rms = np.sqrt(np.mean(nb**2))
        if nb_rms > 0.0:
            acc += env * (nb / nb_rms)
    out_rms = np.sqrt(np.mean(acc**2))
    if out_rms > 0.0:
        acc *= in_rms / out_rms
    return Waveform(acc.astype(np.float32), w.sample_rate)


def sine_wave_speech(w: Waveform) -> Waveform:
    """Reduce speech to four sinusoids riding the tracked formants.

    Frequency and amplitude are linearly interpolated between the 10 ms
    analysis hops and the phase integrates the instantaneous frequency, so
    the synthesis is phase-continuous across frames. Output RMS is matched
    to the input RMS.
    """
    _require_min_length(w)
    in_rms = rms(w)
    tracks = formant_tracks(w, n_tracks=4)

    n = len(w)
    sr = w.sample_rate
    hop = tracks[0].hop
    frame_len = int(round(sr * 25.0 / 1000.0))
    # analysis frame f covers samples [f*hop, f*hop + frame_len); anchor at center
    centers = hop * np.arange(len(tracks[0].freq_hz)) + frame_len // 2
    t_samples = np.arange(n)

    acc = np.zeros(n)
    for track in tracks:
        inst_freq = np.interp(t_samples, centers, track.freq_hz)
        inst_amp = np.interp(t_samples, centers, track.amplitude)
        phase = 2.0 * np.pi * np.cumsum(inst_freq) / sr
        acc += inst_amp * np.sin(phase)

    out_rms = np.sqrt(np.mean(acc**2))
    if out_rms > 0.0 and in_rms > 0.0:
        acc *= in_rms / out_rms
    else:
        acc[:] = 0.0
    return Waveform(acc.astype(np.float32), w.sample_rate)
