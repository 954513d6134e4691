"""Dataset manifests, embedding providers, and padded/masked batching."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import text
from .audio import SAMPLE_RATE, read_wav, resample
from .embeddings import (
    SPEAKER_DIM,
    SPEECH_DIM,
    EmbeddingSequence,
    SpeakerEmbedding,
    fuse,
    read_emb,
    synth_speaker_encode,
    synth_speech_encode,
)

log = logging.getLogger(__name__)

BUCKET_WINDOW_BATCHES = 8


class ManifestError(Exception):
    """Unreadable manifest or unresolvable record."""


@dataclass
class Record:
    index: int
    transcript: str
    speaker_id: str
    speaker_class: int = -1
    audio: str = None
    speech_emb: str = None
    speaker_emb: str = None


@dataclass
class Manifest:
    records: list
    speaker_classes: dict

    def __len__(self):
        return len(self.records)

    @property
    def n_speakers(self) -> int:
        return len(self.speaker_classes)


def load_manifest(path) -> Manifest:
    """Parse a JSONL manifest; normalizes transcripts (skipping utterances
    that normalize to nothing) and maps speaker ids to contiguous classes
    in lexicographic order."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    records = []
    index = 0
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{line_no}: invalid JSON ({exc})")
            try:
                transcript = text.normalize_text(row["transcript"])
            except text.EmptyTranscriptError:
                log.warning("%s:%d: transcript normalized to nothing; skipped", path, line_no)
                continue
            except KeyError:
                raise ManifestError(f"{path}:{line_no}: missing transcript")
            if "speaker_id" not in row:
                raise ManifestError(f"{path}:{line_no}: missing speaker_id")
            rec = Record(index=index, transcript=transcript, speaker_id=str(row["speaker_id"]))
            audio = row.get("audio")
            if isinstance(audio, str):
                rec.audio = audio
                paths = [audio]
            elif isinstance(audio, dict):
                try:
                    rec.speech_emb = audio["speech_emb"]
                    rec.speaker_emb = audio["speaker_emb"]
                except KeyError:
                    raise ManifestError(
                        f"{path}:{line_no}: embedding records need speech_emb and speaker_emb"
                    )
                paths = [rec.speech_emb, rec.speaker_emb]
            else:
                raise ManifestError(f"{path}:{line_no}: record needs an audio field")
            for p in paths:
                if not Path(p).exists():
                    raise ManifestError(f"{path}:{line_no}: missing file {p}")
            records.append(rec)
            index += 1
    if not records:
        raise ManifestError(f"{path}: no usable records")
    classes = {sid: i for i, sid in enumerate(sorted({r.speaker_id for r in records}))}
    for rec in records:
        rec.speaker_class = classes[rec.speaker_id]
    return Manifest(records, classes)


def load_waveform(record: Record):
    """Canonical 16 kHz waveform for a WAV-backed record."""
    if record.audio is None:
        raise ManifestError(f"record {record.index} has no raw audio (EMB1-only)")
    w = read_wav(record.audio)
    if w.sample_rate != SAMPLE_RATE:
        w = resample(w, SAMPLE_RATE)
    return w


def synthetic_provider(record: Record):
    """Embed a WAV record with the deterministic synthetic encoders."""
    w = load_waveform(record)
    return synth_speech_encode(w), synth_speaker_encode(w)


def emb_file_provider(record: Record):
    """Read precomputed EMB1 pairs (e.g. from the exporter)."""
    speech = read_emb(record.speech_emb)
    speaker = read_emb(record.speaker_emb)
    if speech.shape[1] != SPEECH_DIM:
        raise ManifestError(
            f"{record.speech_emb}: expected {SPEECH_DIM} columns, got {speech.shape[1]}"
        )
    return EmbeddingSequence(speech), SpeakerEmbedding(speaker.reshape(-1))


def default_provider(record: Record):
    if record.speech_emb is not None:
        return emb_file_provider(record)
    return synthetic_provider(record)


@dataclass
class Batch:
    features: np.ndarray  # (B, N_max, d) zero-padded
    mask: np.ndarray      # (B, N_max) bool
    labels: list          # per-item token lists (no pad/sos/eos)
    speakers: np.ndarray  # (B,) class indices
    indices: list         # manifest record indices

    def __post_init__(self):
        assert self.mask.shape == self.features.shape[:2]


class EmbeddingCache:
    """Memoizes provider outputs per record index (encoders are pure)."""

    def __init__(self, provider):
        self.provider = provider
        self._store = {}

    def __call__(self, record: Record):
        if record.index not in self._store:
            self._store[record.index] = self.provider(record)
        return self._store[record.index]


def _features_for(record: Record, cache, joint: bool):
    speech, speaker = cache(record)
    if joint:
        return fuse(speech, speaker).data
    return speech.data


def make_batches(manifest: Manifest, batch_size: int, seed: int, provider,
                 epoch: int = 0, joint: bool = True, indices=None):
    """Yield padded batches, deterministic per (seed, epoch).

    Records are shuffled with a seeded generator, then length-bucketed
    inside windows of 8 x batch_size to limit padding waste.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    cache = provider if isinstance(provider, EmbeddingCache) else EmbeddingCache(provider)
    pool = list(manifest.records) if indices is None else [manifest.records[i] for i in indices]
    if not pool:
        return
    rng = np.random.default_rng([seed, epoch])
    order = rng.permutation(len(pool))

    window = BUCKET_WINDOW_BATCHES * batch_size
    arranged = []
    for start in range(0, len(order), window):
        chunk = [pool[i] for i in order[start : start + window]]
        chunk.sort(key=lambda r: len(cache(r)[0]))
        arranged.extend(chunk)

    dim = SPEECH_DIM + SPEAKER_DIM if joint else SPEECH_DIM
    for start in range(0, len(arranged), batch_size):
        group = arranged[start : start + batch_size]
        feats_list = [_features_for(r, cache, joint) for r in group]
        n_max = max(f.shape[0] for f in feats_list)
        feats = np.zeros((len(group), n_max, dim), dtype=np.float32)
        mask = np.zeros((len(group), n_max), dtype=bool)
        for i, f in enumerate(feats_list):
            feats[i, : f.shape[0]] = f
            mask[i, : f.shape[0]] = True
        yield Batch(
            features=feats,
            mask=mask,
            labels=[text.tokenize(r.transcript) for r in group],
            speakers=np.array([r.speaker_class for r in group]),
            indices=[r.index for r in group],
        )
