import numpy as np
import pytest

from jointasr.audio import Waveform
from jointasr.embeddings import (
    EmbFileError,
    EmbeddingSequence,
    SpeakerEmbedding,
    fuse,
    read_emb,
    synth_speaker_encode,
    synth_speech_encode,
    write_emb,
)
from conftest import SR, tone
from oracles import synth_vowel


def test_speech_encode_frame_count_and_determinism():
    w = tone(500, duration_s=1.0)
    emb = synth_speech_encode(w)
    assert emb.data.shape == (49, 512)  # 98 mel frames paired down to 49
    assert emb.frame_hop_ms == 20.0
    again = synth_speech_encode(tone(500, duration_s=1.0))
    np.testing.assert_array_equal(emb.data, again.data)


def test_speech_encode_scale_robustness():
    w = tone(600, duration_s=1.0, amplitude=0.8)
    half = Waveform(0.5 * w.samples, SR)
    a = synth_speech_encode(w).data
    b = synth_speech_encode(half).data
    cos = np.sum(a * b) / (np.linalg.norm(a) * np.linalg.norm(b))
    assert cos >= 0.95


def test_speech_encode_too_short():
    with pytest.raises(ValueError):
        synth_speech_encode(Waveform(np.zeros(100, np.float32), SR))


def test_speaker_encode_unit_norm_and_time_reversal():
    # frame-aligned length: (8080 - 400) % 160 == 0, so reversal permutes frames
    w = Waveform(synth_vowel([700, 1220, 2600], 0.505, SR), SR)
    emb = synth_speaker_encode(w)
    assert np.linalg.norm(emb.data) == pytest.approx(1.0, abs=1e-6)
    rev = synth_speaker_encode(Waveform(w.samples[::-1].copy(), SR))
    np.testing.assert_allclose(rev.data, emb.data, atol=2e-5)


def test_speaker_encode_distinguishes_synthetic_voices():
    a = synth_speaker_encode(Waveform(synth_vowel([700, 1220, 2600], 0.5, SR), SR))
    b = synth_speaker_encode(Waveform(synth_vowel([350, 900, 2200], 0.5, SR, f0_hz=180), SR))
    assert float(np.dot(a.data, b.data)) < 0.99


def test_speaker_encode_too_short():
    with pytest.raises(ValueError):
        synth_speaker_encode(tone(500, duration_s=0.05))


# -- EMB1 format --------------------------------------------------------

def test_emb_round_trip(tmp_path):
    path = tmp_path / "m.emb1"
    m = np.ones((3, 4), dtype=np.float32)
    write_emb(path, m)
    np.testing.assert_array_equal(read_emb(path), m)


def test_emb_round_trip_random_shapes(tmp_path, rng):
    for i in range(25):
        rows, cols = rng.integers(1, 65), rng.integers(1, 65)
        m = rng.standard_normal((rows, cols)).astype(np.float32)
        path = tmp_path / f"r{i}.emb1"
        write_emb(path, m)
        back = read_emb(path)
        assert back.dtype == np.float32
        np.testing.assert_array_equal(back, m)


def test_emb_detects_corruption(tmp_path, rng):
    path = tmp_path / "c.emb1"
    write_emb(path, rng.standard_normal((4, 5)).astype(np.float32))
    blob = bytearray(path.read_bytes())
    blob[12 + 7] ^= 0xFF  # flip one payload byte
    path.write_bytes(bytes(blob))
    with pytest.raises(EmbFileError):
        read_emb(path)


def test_emb_detects_truncation_and_bad_magic(tmp_path, rng):
    path = tmp_path / "t.emb1"
    write_emb(path, rng.standard_normal((4, 5)).astype(np.float32))
    blob = path.read_bytes()
    path.write_bytes(blob[:-9])
    with pytest.raises(EmbFileError):
        read_emb(path)
    path.write_bytes(b"NOPE" + blob[4:])
    with pytest.raises(EmbFileError):
        read_emb(path)


# -- fusion ----------------------------------------------------------------

def test_fuse_shape_and_slices(rng):
    speech = EmbeddingSequence(rng.standard_normal((49, 512)).astype(np.float32))
    vec = rng.standard_normal(192).astype(np.float32)
    speaker = SpeakerEmbedding(vec / np.linalg.norm(vec))
    joint = fuse(speech, speaker)
    assert joint.data.shape == (49, 704)
    np.testing.assert_array_equal(joint.data[:, :512], speech.data)
    for row in joint.data[:, 512:]:
        np.testing.assert_array_equal(row, speaker.data)


def test_zero_speaker_rejected():
    with pytest.raises(ValueError):
        SpeakerEmbedding(np.zeros(192, dtype=np.float32))
