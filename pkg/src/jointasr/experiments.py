"""The two adversarial evaluation protocols as reproducible pipelines:
an 8-talker babble SNR sweep and the augmented-speech conditions
(noise vocoding at several channel counts, sine-wave speech)."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .audio import Waveform
from .augment import SnrSpec, VocodeSpec, make_babble, mix_at_snr, noise_vocode, sine_wave_speech
from .data import Manifest, load_waveform
from .embeddings import fuse, synth_speaker_encode, synth_speech_encode
from .metrics import cer, ctc_greedy_decode
from .model import JointModel

RESULT_FIELDS = ["experiment", "condition", "n_items", "cer_mean", "cer_std", "sra_mean"]

BABBLE_TALKERS = 8
DEFAULT_SNRS_DB = (-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, math.inf)
VOCODE_CHANNELS = (1, 4, 16, 64)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    condition: str
    n_items: int
    cer_mean: float
    cer_std: float
    sra_mean: float = None  # None (blank in CSV) for the ablation model


@dataclass(frozen=True)
class PairSet:
    """Foreground/background pairings, fixed across every SNR condition."""

    pairs: tuple  # of (foreground_index, (8 background indices))
    seed: int

    def __post_init__(self):
        for fg, bgs in self.pairs:
            if fg in bgs:
                raise ValueError("a foreground must not appear in its own babble")
            if len(bgs) != BABBLE_TALKERS:
                raise ValueError(f"each pair needs {BABBLE_TALKERS} background talkers")


def condition_sort_key(condition: str):
    """Numeric conditions ascending; 'inf' and 'sinewave' sort last."""
    if condition == "inf":
        return (1, math.inf)
    if condition == "sinewave":
        return (2, 0.0)
    return (0, float(condition))


def format_snr(snr_db: float) -> str:
    if math.isinf(snr_db):
        return "inf"
    if float(snr_db).is_integer():
        return str(int(snr_db))
    return repr(float(snr_db))


def build_pairs(manifest: Manifest, n_pairs: int, seed: int,
                exclude_speakers=None) -> PairSet:
    """Sample foreground/background pairings once, seeded.

    `exclude_speakers` (speaker_id strings) bars those talkers from the
    babble backgrounds; default is no exclusion.
    """
    n = len(manifest)
    if n < BABBLE_TALKERS + 1:
        raise ValueError(
            f"babble needs at least {BABBLE_TALKERS + 1} distinct utterances, manifest has {n}"
        )
    excluded = set(exclude_speakers or ())
    bg_pool = np.array([
        r.index for r in manifest.records if r.speaker_id not in excluded
    ])
    if bg_pool.size < BABBLE_TALKERS:
        raise ValueError(
            f"only {bg_pool.size} utterances remain for babble after excluding "
            f"{sorted(excluded)}"
        )
    rng = np.random.default_rng([seed, 0xBA88])
    pairs = []
    for _ in range(n_pairs):
        fg = int(rng.integers(n))
        others = bg_pool[bg_pool != fg]
        bgs = rng.choice(others, size=BABBLE_TALKERS,
                         replace=others.size < BABBLE_TALKERS)
        pairs.append((fg, tuple(int(b) for b in bgs)))
    return PairSet(tuple(pairs), seed)


class _WaveCache:
    def __init__(self, manifest):
        self.manifest = manifest
        self._store = {}

    def __getitem__(self, index):
        if index not in self._store:
            self._store[index] = load_waveform(self.manifest.records[index])
        return self._store[index]


def _score_items(model: JointModel, items):
    """items: list of (waveform, reference text, speaker class). Returns
    (cer list, correct-speaker list); the latter is empty for the ablation."""
    joint = model.config.use_speaker_branch
    cers = []
    correct = []
    batch_size = 8
    for start in range(0, len(items), batch_size):
        group = items[start : start + batch_size]
        encoded = [synth_speech_encode(w) for w, _, _ in group]
        if joint:
            feats_list = [
                fuse(e, synth_speaker_encode(w)).data
                for e, (w, _, _) in zip(encoded, group)
            ]
        else:
            feats_list = [e.data for e in encoded]
        n_max = max(f.shape[0] for f in feats_list)
        feats = np.zeros((len(group), n_max, feats_list[0].shape[1]), dtype=np.float32)
        mask = np.zeros((len(group), n_max), dtype=bool)
        for i, f in enumerate(feats_list):
            feats[i, : f.shape[0]] = f
            mask[i, : f.shape[0]] = True
        speech, speaker = model.forward(feats, mask)
        for i, (_, ref, spk) in enumerate(group):
            n_i = int(mask[i].sum())
            hyp = ctc_greedy_decode(speech.value[i, :n_i])
            cers.append(cer(ref, hyp))
            if joint:
                correct.append(1.0 if int(np.argmax(speaker.value[i])) == spk else 0.0)
    return cers, correct


def _row(experiment, condition, cers, correct):
    return ResultRow(
        experiment=experiment,
        condition=condition,
        n_items=len(cers),
        cer_mean=float(np.mean(cers)),
        cer_std=float(np.std(cers)),
        sra_mean=float(np.mean(correct)) if correct else None,
    )


def run_babble(model: JointModel, manifest: Manifest, n_pairs: int = 1000,
               snrs=DEFAULT_SNRS_DB, seed: int = 0, exclude_speakers=None):
    """Mix each foreground with its 8-talker babble at every SNR and score.

    The pair set is built once and reused at every SNR, so acoustic
    difficulty varies only through the SNR. Returns (rows, PairSet).
    """
    pair_set = build_pairs(manifest, n_pairs, seed, exclude_speakers=exclude_speakers)
    waves = _WaveCache(manifest)
    babbles = {}
    for fg, bgs in pair_set.pairs:
        if bgs not in babbles:
            babbles[bgs] = make_babble([waves[b] for b in bgs])

    rows = []
    for snr_db in sorted(snrs, key=lambda s: (math.isinf(s), s)):
        spec = SnrSpec(float(snr_db))
        items = []
        for fg, bgs in pair_set.pairs:
            rec = manifest.records[fg]
            mixed = mix_at_snr(waves[fg], babbles[bgs], spec).waveform
            items.append((mixed, rec.transcript, rec.speaker_class))
        cers, correct = _score_items(model, items)
        rows.append(_row("babble", format_snr(snr_db), cers, correct))
    return rows, pair_set


def run_augment(model: JointModel, manifest: Manifest, vocode_n: int = 1000,
                sine_n: int = 795, seed: int = 0,
                channels=VOCODE_CHANNELS):
    """Noise-vocode (per channel count) and sine-wave conditions.

    Returns (rows, sampled) where sampled maps condition -> record indices,
    for reproducibility logging.
    """
    n = len(manifest)
    if n < 1:
        raise ValueError("empty manifest")
    rng = np.random.default_rng([seed, 0xA6])
    waves = _WaveCache(manifest)
    vocode_ids = [int(i) for i in rng.integers(0, n, size=vocode_n)]
    sine_ids = [int(i) for i in rng.integers(0, n, size=sine_n)]
    sampled = {"vocode": vocode_ids, "sinewave": sine_ids}

    rows = []
    for c in sorted(channels):
        items = []
        for j, idx in enumerate(vocode_ids):
            rec = manifest.records[idx]
            out = noise_vocode(waves[idx], VocodeSpec(c),
                               rng_seed=(seed * 1000003 + c * 1009 + j) & 0x7FFFFFFF)
            items.append((out, rec.transcript, rec.speaker_class))
        cers, correct = _score_items(model, items)
        rows.append(_row("augment", str(c), cers, correct))

    items = []
    for idx in sine_ids:
        rec = manifest.records[idx]
        items.append((sine_wave_speech(waves[idx]), rec.transcript, rec.speaker_class))
    cers, correct = _score_items(model, items)
    rows.append(_row("augment", "sinewave", cers, correct))
    return rows, sampled


def write_results_csv(rows, path):
    """Fixed-schema CSV with floats at 6 decimals; ablation sra is blank."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_FIELDS)
        for r in rows:
            writer.writerow([
                r.experiment,
                r.condition,
                r.n_items,
                f"{r.cer_mean:.6f}",
                f"{r.cer_std:.6f}",
                "" if r.sra_mean is None else f"{r.sra_mean:.6f}",
            ])


def read_results_csv(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULT_FIELDS:
            raise ValueError(f"{path}: unexpected results header {reader.fieldnames}")
        for rec in reader:
            rows.append(ResultRow(
                experiment=rec["experiment"],
                condition=rec["condition"],
                n_items=int(rec["n_items"]),
                cer_mean=float(rec["cer_mean"]),
                cer_std=float(rec["cer_std"]),
                sra_mean=float(rec["sra_mean"]) if rec["sra_mean"] else None,
            ))
    return rows
