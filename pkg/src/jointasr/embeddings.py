"""Per-frame speech embeddings (512-d), per-utterance speaker embeddings
(192-d), the EMB1 binary interchange format, and their fusion into the
704-d joint feature.

The synthetic encoders here are deterministic stand-ins for frozen
pretrained encoders: they make the whole pipeline runnable and testable
with no model downloads. Real embeddings arrive through EMB1 files instead
(see the exporter package).
"""

import struct
from dataclasses import dataclass

import numpy as np

from .audio import Waveform, stft

SPEECH_DIM = 512
SPEAKER_DIM = 192
JOINT_DIM = SPEECH_DIM + SPEAKER_DIM

N_MELS = 80
MEL_FRAME_MS = 25.0
MEL_HOP_MS = 10.0
LOG_FLOOR = 1e-5

# Build constants: these seeds pin the random projections of the synthetic
# encoders, so embeddings are reproducible across runs and machines.
SPEECH_PROJECTION_SEED = 1337
SPEAKER_PROJECTION_SEED = 7331

EMB_MAGIC = b"EMB1"


class EmbFileError(Exception):
    """Malformed or corrupt EMB1 file."""


@dataclass
class EmbeddingSequence:
    """(N, 512) float32 frame embeddings at a fixed frame hop."""

    data: np.ndarray
    frame_hop_ms: float = 20.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2 or self.data.shape[1] != SPEECH_DIM:
            raise ValueError(f"speech embeddings must be (N, {SPEECH_DIM})")
        if self.data.shape[0] < 1:
            raise ValueError("need at least one embedding frame")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("non-finite speech embedding")

    def __len__(self):
        return self.data.shape[0]


@dataclass
class SpeakerEmbedding:
    """(192,) float32 voice-identity vector with non-zero norm."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32).reshape(-1)
        if self.data.shape[0] != SPEAKER_DIM:
            raise ValueError(f"speaker embedding must have {SPEAKER_DIM} dims")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("non-finite speaker embedding")
        if float(np.linalg.norm(self.data)) == 0.0:
            raise ValueError("speaker embedding must have non-zero norm")


@dataclass
class JointFeature:
    """(N, 704): speech embedding columns then the broadcast speaker vector."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2 or self.data.shape[1] != JOINT_DIM:
            raise ValueError(f"joint features must be (N, {JOINT_DIM})")

    def __len__(self):
        return self.data.shape[0]


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def _mel_filterbank(sample_rate, n_fft, n_mels=N_MELS, f_min=20.0):
    f_max = sample_rate / 2.0
    mel_pts = np.linspace(_hz_to_mel(f_min), _hz_to_mel(f_max), n_mels + 2)
    hz_pts = _mel_to_hz(mel_pts)
    bins = np.fft.rfftfreq(n_fft, 1.0 / sample_rate)
    fb = np.zeros((n_mels, bins.shape[0]))
    for i in range(n_mels):
        lo, mid, hi = hz_pts[i], hz_pts[i + 1], hz_pts[i + 2]
        up = (bins - lo) / max(mid - lo, 1e-9)
        down = (hi - bins) / max(hi - mid, 1e-9)
        fb[i] = np.maximum(0.0, np.minimum(up, down))
    return fb


def log_mel(w: Waveform) -> np.ndarray:
    """(T, 80) log power mel spectrogram, 25 ms frames with a 10 ms hop."""
    if w.sample_rate != 16000:
        raise ValueError("encoders expect 16 kHz audio; resample first")
    frame_len = int(round(w.sample_rate * MEL_FRAME_MS / 1000.0))
    hop = int(round(w.sample_rate * MEL_HOP_MS / 1000.0))
    if len(w) < frame_len:
        raise ValueError("waveform shorter than one mel frame (25 ms)")
    # symmetric window: reversing frame-aligned audio permutes mel frames
    spec = stft(w, frame_len, hop, periodic=False)
    n_fft = spec.frame_len
    power = np.abs(spec.frames) ** 2
    fb = _mel_filterbank(w.sample_rate, n_fft)
    mel = power @ fb.T
    return np.log(np.maximum(mel, LOG_FLOOR))


def _projection(seed, rows, cols):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((rows, cols)) / np.sqrt(rows)


_SPEECH_PROJ = None
_SPEAKER_PROJ = None


def _speech_proj():
    global _SPEECH_PROJ
    if _SPEECH_PROJ is None:
        _SPEECH_PROJ = _projection(SPEECH_PROJECTION_SEED, 2 * N_MELS, SPEECH_DIM)
    return _SPEECH_PROJ


def _speaker_proj():
    global _SPEAKER_PROJ
    if _SPEAKER_PROJ is None:
        _SPEAKER_PROJ = _projection(SPEAKER_PROJECTION_SEED, 2 * N_MELS, SPEAKER_DIM)
    return _SPEAKER_PROJ


def synth_speech_encode(w: Waveform) -> EmbeddingSequence:
    """Deterministic frame encoder: log-mel, consecutive-frame stacking to a
    20 ms effective hop, fixed random projection to 512-d, then per-frame
    layer normalization."""
    mel = log_mel(w)
    n_pairs = mel.shape[0] // 2
    if n_pairs < 1:
        raise ValueError("waveform too short for one stacked embedding frame")
    stacked = mel[: 2 * n_pairs].reshape(n_pairs, 2 * N_MELS)
    proj = stacked @ _speech_proj()
    mean = proj.mean(axis=1, keepdims=True)
    var = proj.var(axis=1, keepdims=True)
    normed = (proj - mean) / np.sqrt(var + 1e-6)
    return EmbeddingSequence(normed.astype(np.float32), frame_hop_ms=2 * MEL_HOP_MS)


def synth_speaker_encode(w: Waveform) -> SpeakerEmbedding:
    """Deterministic utterance encoder: time mean and std of the log-mel,
    fixed random projection to 192-d, L2-normalized."""
    if len(w) < int(0.1 * w.sample_rate):
        raise ValueError("speaker encoding needs at least 100 ms of audio")
    mel = log_mel(w)
    stats = np.concatenate([mel.mean(axis=0), mel.std(axis=0)])
    vec = stats @ _speaker_proj()
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        vec = vec + 1e-6  # degenerate constant input; keep the norm invariant
        norm = np.linalg.norm(vec)
    return SpeakerEmbedding((vec / norm).astype(np.float32))


def _emb_checksum(chunks) -> int:
    total = 0
    for chunk in chunks:
        total = (total + int(np.frombuffer(chunk, dtype=np.uint8).sum(dtype=np.uint64))) % (1 << 64)
    return total


def write_emb(path, matrix: np.ndarray):
    """Write an EMB1 file: magic, u32 rows, u32 cols, f32-LE row-major
    payload, then a u64 checksum (byte sum mod 2^64 of everything before it)."""
    m = np.ascontiguousarray(matrix, dtype="<f4")
    if m.ndim != 2:
        raise ValueError("EMB1 stores 2-D matrices")
    header = EMB_MAGIC + struct.pack("<II", m.shape[0], m.shape[1])
    payload = m.tobytes()
    checksum = _emb_checksum([header, payload])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<Q", checksum))


def read_emb(path) -> np.ndarray:
    """Read and checksum-validate an EMB1 file."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 20 or data[:4] != EMB_MAGIC:
        raise EmbFileError(f"{path}: not an EMB1 file")
    rows, cols = struct.unpack("<II", data[4:12])
    expected = 12 + rows * cols * 4 + 8
    if len(data) != expected:
        raise EmbFileError(
            f"{path}: size {len(data)} does not match {rows}x{cols} payload"
        )
    (stored,) = struct.unpack("<Q", data[-8:])
    if _emb_checksum([data[:-8]]) != stored:
        raise EmbFileError(f"{path}: checksum mismatch")
    return np.frombuffer(data[12:-8], dtype="<f4").reshape(rows, cols).copy()


def fuse(speech: EmbeddingSequence, speaker: SpeakerEmbedding) -> JointFeature:
    """Concatenate the speaker vector onto every speech frame (704-d rows)."""
    n = len(speech)
    joint = np.empty((n, JOINT_DIM), dtype=np.float32)
    joint[:, :SPEECH_DIM] = speech.data
    joint[:, SPEECH_DIM:] = speaker.data[None, :]
    return JointFeature(joint)
