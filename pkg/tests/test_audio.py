import numpy as np
import pytest

from jointasr.audio import (
    BandSpec,
    UnsupportedWavError,
    Waveform,
    WavFormatError,
    bandpass_bank,
    envelope,
    formant_tracks,
    read_wav,
    resample,
    rms,
    stft,
    write_wav,
)
from conftest import SR, noise_wave, tone
from oracles import fft_peak_hz, synth_vowel


# -- wav i/o ----------------------------------------------------------

def test_wav_round_trip_within_quantization(tmp_path, rng):
    w = Waveform(rng.uniform(-0.9, 0.9, SR).astype(np.float32), SR)
    path = tmp_path / "x.wav"
    write_wav(path, w)
    back = read_wav(path)
    assert back.sample_rate == SR
    assert len(back) == len(w)
    assert np.abs(back.samples - w.samples).max() <= 1.0 / 32768


def test_write_clamps_overrange(tmp_path):
    w = Waveform.__new__(Waveform)
    w.samples = np.array([2.0, -2.0, 0.0], dtype=np.float32)
    w.sample_rate = SR
    path = tmp_path / "c.wav"
    write_wav(path, w)
    raw = np.frombuffer(path.read_bytes()[44:], dtype="<i2")
    assert raw[0] == 32767 and raw[1] == -32768


def test_write_empty_rejected(tmp_path):
    with pytest.raises(ValueError):
        write_wav(tmp_path / "e.wav", Waveform(np.zeros(0, np.float32), SR))


def test_read_stereo_downmix_cancellation(tmp_path):
    import struct

    x = (np.sin(np.arange(100) * 0.1) * 10000).astype("<i2")
    interleaved = np.empty(200, dtype="<i2")
    interleaved[0::2] = x
    interleaved[1::2] = -x
    payload = interleaved.tobytes()
    hdr = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 2, SR, SR * 4, 4, 16)
    hdr += b"data" + struct.pack("<I", len(payload))
    path = tmp_path / "st.wav"
    path.write_bytes(hdr + payload)
    w = read_wav(path)
    assert len(w) == 100
    np.testing.assert_allclose(w.samples, 0.0, atol=1e-7)


def test_read_int16_scaling(tmp_path):
    import struct

    payload = struct.pack("<h", 32767)
    hdr = b"RIFF" + struct.pack("<I", 36 + 2) + b"WAVE"
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, SR, SR * 2, 2, 16)
    hdr += b"data" + struct.pack("<I", 2)
    path = tmp_path / "one.wav"
    path.write_bytes(hdr + payload)
    assert read_wav(path).samples[0] == pytest.approx(32767 / 32768)


def test_read_rejects_garbage_and_unsupported(tmp_path):
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"not a wav at all")
    with pytest.raises(WavFormatError):
        read_wav(bad)

    import struct

    # mu-law (format 7) is structurally valid but unsupported
    hdr = b"RIFF" + struct.pack("<I", 36 + 4) + b"WAVE"
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 7, 1, 8000, 8000, 1, 8)
    hdr += b"data" + struct.pack("<I", 4) + b"\x00\x00\x00\x00"
    ulaw = tmp_path / "u.wav"
    ulaw.write_bytes(hdr)
    with pytest.raises(UnsupportedWavError):
        read_wav(ulaw)


def test_read_float32(tmp_path):
    import struct

    vals = np.array([0.25, -0.5, 1.0], dtype="<f4")
    payload = vals.tobytes()
    hdr = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 3, 1, SR, SR * 4, 4, 32)
    hdr += b"data" + struct.pack("<I", len(payload))
    path = tmp_path / "f.wav"
    path.write_bytes(hdr + payload)
    np.testing.assert_array_equal(read_wav(path).samples, vals)


# -- resample ----------------------------------------------------------

def test_resample_identity():
    w = tone(440)
    out = resample(w, SR)
    np.testing.assert_array_equal(out.samples, w.samples)


def test_resample_preserves_tone():
    w = tone(1000)
    out = resample(w, 8000)
    assert out.sample_rate == 8000
    assert abs(fft_peak_hz(out.samples, 8000) - 1000) <= 8000 / len(out)


def test_resample_length_ratio():
    w = Waveform(np.random.default_rng(0).standard_normal(48000).astype(np.float32) * 0.1, 48000)
    out = resample(w, 16000)
    assert len(out) == 16000


# -- rms ---------------------------------------------------------------

def test_rms_values():
    assert rms(Waveform(np.zeros(100, np.float32), SR)) == 0.0
    assert rms(Waveform(np.full(100, 0.5, np.float32), SR)) == pytest.approx(0.5)
    assert rms(tone(1000, amplitude=1.0)) == pytest.approx(1 / np.sqrt(2), abs=1e-3)
    with pytest.raises(ValueError):
        rms(Waveform(np.zeros(0, np.float32), SR))


# -- stft ----------------------------------------------------------------

def test_stft_tone_peak_bin():
    spec = stft(tone(1000), 400, 160)
    for frame in spec.frames[2:-2]:
        assert np.argmax(np.abs(frame)) == 25


def test_stft_zeros_and_frame_count():
    spec = stft(Waveform(np.zeros(SR, np.float32), SR), 400, 160)
    assert spec.frames.shape == (98, 201)
    np.testing.assert_array_equal(spec.frames, 0)


@pytest.mark.parametrize("n,frame,hop", [(16000, 400, 160), (500, 500, 100), (1024, 256, 64)])
def test_stft_frame_count_formula(n, frame, hop):
    w = Waveform(np.random.default_rng(1).standard_normal(n).astype(np.float32) * 0.1, SR)
    spec = stft(w, frame, hop)
    assert spec.frames.shape == (1 + (n - frame) // hop, frame // 2 + 1)


def test_stft_preconditions():
    with pytest.raises(ValueError):
        stft(tone(100, 0.01), 400, 0)
    with pytest.raises(ValueError):
        stft(tone(100, 0.01), 400, 500)
    with pytest.raises(ValueError):
        stft(Waveform(np.zeros(100, np.float32), SR), 400, 160)


# -- bandpass bank -------------------------------------------------------

def test_bandpass_pass_and_stop():
    w = tone(1000)
    outs = bandpass_bank(w, [BandSpec(800, 1200), BandSpec(3000, 4000)])
    assert rms(outs[0]) >= 0.9 * rms(w)
    assert rms(outs[1]) <= 0.01 * rms(w)
    assert all(len(o) == len(w) for o in outs)


def test_bandpass_zeros_and_linearity(rng):
    zeros = Waveform(np.zeros(SR, np.float32), SR)
    out = bandpass_bank(zeros, [BandSpec(100, 200)])[0]
    np.testing.assert_array_equal(out.samples, 0)

    w = noise_wave(seed=4)
    scaled = Waveform(0.25 * w.samples, SR)
    a = bandpass_bank(w, [BandSpec(500, 1500)])[0]
    b = bandpass_bank(scaled, [BandSpec(500, 1500)])[0]
    np.testing.assert_allclose(b.samples, 0.25 * a.samples, atol=1e-5 * rms(w))


def test_bandpass_energy_split_covers_broadband():
    w = noise_wave(seed=8, amplitude=0.2)
    edges = np.geomspace(80, 7600, 9)
    bands = [BandSpec(edges[i], edges[i + 1]) for i in range(8)]
    outs = bandpass_bank(w, bands)
    total = sum(rms(o) ** 2 for o in outs)
    ref = rms(w) ** 2  # broadband energy; bands cover all but the roll-offs
    assert 0.7 * ref <= total <= 1.1 * ref


def test_bandpass_invalid_band():
    with pytest.raises(ValueError):
        bandpass_bank(tone(100), [BandSpec(4000, 9000)])


# -- envelope -------------------------------------------------------------

def test_envelope_zeros():
    out = envelope(Waveform(np.zeros(SR, np.float32), SR))
    np.testing.assert_array_equal(out.samples, 0)


def test_envelope_constant_dc_gain():
    out = envelope(Waveform(np.full(SR, 0.8, np.float32), SR))
    mid = out.samples[SR // 4 : 3 * SR // 4]
    np.testing.assert_allclose(mid, 0.8, atol=1e-3)


def test_envelope_tracks_modulator():
    t = np.arange(SR * 2) / SR
    mod = 0.5 * (1 + 0.9 * np.sin(2 * np.pi * 4 * t))
    w = Waveform((mod * np.sin(2 * np.pi * 1000 * t)).astype(np.float32), SR)
    env = envelope(w).samples.astype(np.float64)
    env = env - env.mean()
    assert abs(fft_peak_hz(env, SR) - 4.0) < 0.5


def test_envelope_nonneg_and_sign_flip_invariant():
    w = noise_wave(seed=3, amplitude=0.4)
    band = bandpass_bank(w, [BandSpec(300, 3000)])[0]
    pos = envelope(band)
    neg = envelope(Waveform(-band.samples, SR))
    assert pos.samples.min() >= 0
    # rectification symmetry holds once the 30 Hz low-pass has settled;
    # the first/last 3 periods carry edge-padding transients
    settle = 3 * SR // 30
    np.testing.assert_allclose(
        pos.samples[settle:-settle], neg.samples[settle:-settle], atol=1e-5
    )


def test_envelope_precondition():
    with pytest.raises(ValueError):
        envelope(tone(100), cutoff_hz=0)
    with pytest.raises(ValueError):
        envelope(tone(100), cutoff_hz=9000)


# -- formant tracking ------------------------------------------------------

def test_formants_on_synthetic_vowel():
    targets = [700.0, 1220.0, 2600.0]
    w = Waveform(synth_vowel(targets, 1.0, SR), SR)
    tracks = formant_tracks(w, n_tracks=4)
    for track, target in zip(tracks[:3], targets):
        assert abs(np.median(track.freq_hz) - target) <= 75, target


def test_formants_pure_tone():
    tracks = formant_tracks(tone(1000), n_tracks=4)
    assert abs(np.median(tracks[0].freq_hz) - 1000) <= 50


def test_formants_silence_zero_amplitude():
    tracks = formant_tracks(Waveform(np.zeros(SR, np.float32), SR))
    for track in tracks:
        np.testing.assert_array_equal(track.amplitude, 0)
        assert np.all((track.freq_hz > 0) & (track.freq_hz < SR / 2))


def test_formants_preconditions():
    with pytest.raises(ValueError):
        formant_tracks(Waveform(np.zeros(100, np.float32), SR))
    with pytest.raises(ValueError):
        formant_tracks(tone(500), n_tracks=6)
