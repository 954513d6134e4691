"""Waveform I/O and the DSP substrate: resampling, spectral analysis,
filter banks, envelope extraction, and LPC formant tracking.

All audio is mono float32 in [-1, 1]; the canonical sample rate is 16 kHz
(corpora are resampled on ingest). Clipping is applied at serialization
only, never on in-memory waveforms.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .kernels import lpc_batch

SAMPLE_RATE = 16000

LPC_ORDER = 12
PREEMPHASIS = 0.97
FORMANT_FRAME_MS = 25.0
FORMANT_HOP_MS = 10.0
FORMANT_MAX_BANDWIDTH_HZ = 400.0


class WavFormatError(Exception):
    """Malformed RIFF/WAVE container."""


class UnsupportedWavError(WavFormatError):
    """Structurally valid WAV with a codec we do not read."""


@dataclass
class Waveform:
    """Mono audio: float32 samples plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)
        if self.samples.ndim != 1:
            raise ValueError("waveform samples must be 1-D")
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate


@dataclass
class ComplexSpectrogram:
    """STFT frames: (T, F) complex with F = frame_len // 2 + 1."""

    frames: np.ndarray
    frame_len: int
    hop: int
    window: str = "hann"


@dataclass
class BandSpec:
    """A band-pass frequency range in Hz."""

    low_hz: float
    high_hz: float

    def validate(self, sample_rate: int):
        nyquist = sample_rate / 2.0
        if not (0.0 < self.low_hz < self.high_hz < nyquist):
            raise ValueError(
                f"band [{self.low_hz}, {self.high_hz}] Hz invalid for "
                f"sample rate {sample_rate} (Nyquist {nyquist})"
            )


@dataclass
class FormantTrack:
    """Per-frame center frequency (Hz) and linear amplitude at a fixed hop."""

    freq_hz: np.ndarray
    amplitude: np.ndarray
    hop: int = field(default=int(SAMPLE_RATE * FORMANT_HOP_MS / 1000))


def read_wav(path) -> Waveform:
    """Read a RIFF/WAVE file (PCM16 or float32, mono or stereo).

    Stereo is downmixed by channel averaging; int16 samples are scaled by
    1/32768. Raises WavFormatError on malformed containers and
    UnsupportedWavError on codecs outside the PCM16/float32 contract.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack("<I", data[pos + 4 : pos + 8])
        body = data[pos + 8 : pos + 8 + size]
        if cid == b"fmt ":
            if len(body) < 16:
                raise WavFormatError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif cid == b"data":
            if len(body) < size:
                raise WavFormatError(f"{path}: truncated data chunk")
            payload = body
        pos += 8 + size + (size & 1)
    if fmt is None or payload is None:
        raise WavFormatError(f"{path}: missing fmt or data chunk")

    audio_format, n_channels, rate, _, _, bits = fmt
    if n_channels < 1:
        raise WavFormatError(f"{path}: zero channels")
    if audio_format == 1 and bits == 16:
        raw = np.frombuffer(payload, dtype="<i2").astype(np.float32) / 32768.0
    elif audio_format == 3 and bits == 32:
        raw = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    else:
        raise UnsupportedWavError(
            f"{path}: unsupported codec (format {audio_format}, {bits}-bit)"
        )
    if n_channels > 1:
        usable = (raw.shape[0] // n_channels) * n_channels
        raw = raw[:usable].reshape(-1, n_channels).mean(axis=1, dtype=np.float64)
        raw = raw.astype(np.float32)
    return Waveform(raw, int(rate))


def write_wav(path, w: Waveform):
    """Write 16-bit PCM mono, clamping samples to [-1, 1] first.

    Quantization uses the 1/32768 step of the reader (positive full scale
    saturates at 32767), which keeps the write/read round trip within one
    least significant bit.
    """
    if len(w) == 0:
        raise ValueError("refusing to write an empty waveform")
    clipped = np.clip(w.samples, -1.0, 1.0)
    pcm = np.clip(np.round(clipped.astype(np.float64) * 32768.0), -32768, 32767).astype("<i2")
    payload = pcm.tobytes()
    hdr = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    hdr += b"fmt " + struct.pack(
        "<IHHIIHH", 16, 1, 1, w.sample_rate, w.sample_rate * 2, 2, 16
    )
    hdr += b"data" + struct.pack("<I", len(payload))
    with open(path, "wb") as fh:
        fh.write(hdr + payload)


def resample(w: Waveform, target_hz: int) -> Waveform:
    """Polyphase resampling with a Kaiser-windowed sinc, 64 taps per phase."""
    if target_hz <= 0:
        raise ValueError("target sample rate must be positive")
    if target_hz == w.sample_rate:
        return Waveform(w.samples.copy(), w.sample_rate)
    g = np.gcd(int(w.sample_rate), int(target_hz))
    up = target_hz // g
    down = w.sample_rate // g
    taps = sps.firwin(64 * up + 1, 1.0 / max(up, down), window=("kaiser", 8.0))
    out = sps.resample_poly(w.samples.astype(np.float64), up, down, window=taps)
    return Waveform(out.astype(np.float32), target_hz)


def rms(w: Waveform) -> float:
    """Root-mean-square level, computed in float64."""
    if len(w) == 0:
        raise ValueError("rms of an empty waveform is undefined")
    return float(np.sqrt(np.mean(np.square(w.samples, dtype=np.float64))))


def stft(w: Waveform, frame_len: int, hop: int, window: str = "hann",
         periodic: bool = True) -> ComplexSpectrogram:
    """Windowed DFT frames; T = 1 + (len - frame_len) // hop.

    `periodic=False` selects the symmetric (palindromic) window variant,
    which makes frame magnitudes invariant to time reversal.
    """
    if hop <= 0 or frame_len < hop:
        raise ValueError("need frame_len >= hop > 0")
    n = len(w)
    if n < frame_len:
        raise ValueError(f"waveform shorter ({n}) than one frame ({frame_len})")
    win = sps.get_window(window, frame_len, fftbins=periodic)
    n_frames = 1 + (n - frame_len) // hop
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = w.samples[idx].astype(np.float64) * win[None, :]
    return ComplexSpectrogram(np.fft.rfft(frames, axis=1), frame_len, hop, window)


def _butter_sos(low_hz, high_hz, sample_rate, btype):
    nyquist = sample_rate / 2.0
    if btype == "bandpass":
        wn = [low_hz / nyquist, high_hz / nyquist]
    else:
        wn = high_hz / nyquist
    return sps.butter(4, wn, btype=btype, output="sos")


def _zero_phase(sos, x, sample_rate, settle_hz):
    # pad with ~3 periods of the slowest filter dynamics so the
    # forward-backward pass settles before the signal proper
    padlen = min(max(15, int(3 * sample_rate / settle_hz)), max(0, x.shape[0] - 1))
    return sps.sosfiltfilt(sos, x, padlen=padlen)


def bandpass_bank(w: Waveform, bands) -> list:
    """Zero-phase 4th-order Butterworth band-pass, one output per band."""
    outs = []
    x = w.samples.astype(np.float64)
    for band in bands:
        band.validate(w.sample_rate)
        sos = _butter_sos(band.low_hz, band.high_hz, w.sample_rate, "bandpass")
        settle = min(band.low_hz, band.high_hz - band.low_hz)
        y = _zero_phase(sos, x, w.sample_rate, settle)
        outs.append(Waveform(y.astype(np.float32), w.sample_rate))
    return outs


def envelope(w: Waveform, cutoff_hz: float = 30.0) -> Waveform:
    """Amplitude envelope: half-wave rectification then zero-phase low-pass.

    The low-pass has unit DC gain, so a constant positive input passes
    through unchanged away from the edges. Output is clamped at 0.
    """
    if not (0.0 < cutoff_hz < w.sample_rate / 2.0):
        raise ValueError("envelope cutoff must sit inside (0, Nyquist)")
    rectified = np.maximum(w.samples.astype(np.float64), 0.0)
    sos = _butter_sos(0.0, cutoff_hz, w.sample_rate, "lowpass")
    smoothed = np.maximum(_zero_phase(sos, rectified, w.sample_rate, cutoff_hz), 0.0)
    return Waveform(smoothed.astype(np.float32), w.sample_rate)


def _frame_signal(x, frame_len, hop):
    n_frames = 1 + (x.shape[0] - frame_len) // hop
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx]


def formant_tracks(w: Waveform, n_tracks: int = 4):
    """Track up to `n_tracks` formants via frame-wise LPC root finding.

    25 ms Hann frames every 10 ms, pre-emphasis 0.97, LPC order 12 at
    16 kHz (scaled with the sample rate). Complex LPC roots with bandwidth
    under 400 Hz become formant candidates, sorted ascending by frequency;
    per-track amplitude is the frame's spectral band energy around the
    center frequency. Unvoiced or silent frames carry amplitude 0 with the
    frequency held from the last voiced frame.
    """
    sr = w.sample_rate
    frame_len = int(round(sr * FORMANT_FRAME_MS / 1000.0))
    hop = int(round(sr * FORMANT_HOP_MS / 1000.0))
    if len(w) < frame_len:
        raise ValueError("waveform shorter than one formant analysis frame")
    if not (1 <= n_tracks <= 5):
        raise ValueError("n_tracks must be in [1, 5]")

    x = w.samples.astype(np.float64)
    pre = np.empty_like(x)
    pre[0] = x[0]
    pre[1:] = x[1:] - PREEMPHASIS * x[:-1]

    win = sps.get_window("hann", frame_len, fftbins=True)
    frames = _frame_signal(pre, frame_len, hop) * win[None, :]
    raw_frames = _frame_signal(x, frame_len, hop)

    order = int(round(LPC_ORDER * sr / 16000.0))
    poly, ok = lpc_batch(frames, order)

    n_frames = frames.shape[0]
    n_fft = 1024
    spec = np.abs(np.fft.rfft(raw_frames * win[None, :], n=n_fft, axis=1)) ** 2
    fft_freqs = np.fft.rfftfreq(n_fft, 1.0 / sr)

    frame_rms = np.sqrt(np.mean(raw_frames**2, axis=1))
    voiced_gate = max(1e-4, 1e-3 * float(frame_rms.max(initial=0.0)))

    freqs = np.zeros((n_frames, n_tracks))
    amps = np.zeros((n_frames, n_tracks))
    # neutral starting frequencies so held values are always in (0, Nyquist)
    last = np.linspace(sr / 16.0, sr * n_tracks / 16.0, n_tracks)

    for f in range(n_frames):
        found = []
        if ok[f] and frame_rms[f] > voiced_gate:
            roots = np.roots(poly[f])
            roots = roots[np.imag(roots) > 1e-8]
            cand_f = np.angle(roots) * sr / (2.0 * np.pi)
            cand_bw = -np.log(np.maximum(np.abs(roots), 1e-12)) * sr / np.pi
            keep = (cand_bw < FORMANT_MAX_BANDWIDTH_HZ) & (cand_f > 50.0) & (
                cand_f < sr / 2.0 - 50.0
            )
            found = sorted(cand_f[keep])[:n_tracks]
        for k in range(n_tracks):
            if k < len(found):
                fc = found[k]
                band = (fft_freqs >= fc - 100.0) & (fft_freqs <= fc + 100.0)
                freqs[f, k] = fc
                amps[f, k] = np.sqrt(spec[f, band].sum())
                last[k] = fc
            else:
                freqs[f, k] = last[k]
                amps[f, k] = 0.0

    return [FormantTrack(freqs[:, k].copy(), amps[:, k].copy(), hop) for k in range(n_tracks)]
