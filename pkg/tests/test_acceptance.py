"""Acceptance suite: every exit criterion at its stated tolerance.

Each test prints one `ACCEPTANCE <name>: PASS` line on success (visible
with `pytest -s` or in captured output); a failed assertion is the
corresponding FAIL. Runtime budgets are asserted where the criterion
states one.
"""

import json
import shutil
import subprocess
import time
from pathlib import Path

import numpy as np
import pytest

from jointasr import text
from jointasr.audio import Waveform, bandpass_bank, envelope, formant_tracks, rms, stft
from jointasr.augment import SnrSpec, VocodeSpec, mix_at_snr, noise_vocode, sine_wave_speech
from jointasr.cli import main as cli_main
from jointasr.data import load_manifest
from jointasr.losses import cross_entropy, ctc_loss, min_frames_for
from jointasr.metrics import cer, edit_counts, wer
from jointasr.model import JointModel, ModelConfig, save_checkpoint
from jointasr.synthcorpus import build_corpus
from jointasr.train import TrainSettings, train
from jointasr import autodiff as ad

from conftest import SR, noise_wave, tone
from oracles import (
    ctc_grad_fd,
    ctc_loss_brute_force,
    edit_distance_recursive,
    speechlike_signal,
    synth_vowel,
)

SNR_BUDGET_S = {"ctc": 10.0, "model_grad": 30.0, "overfit": 300.0, "trend": 900.0}


def _report(name):
    print(f"\nACCEPTANCE {name}: PASS")


# -- criterion: CTC oracle suite ----------------------------------------

def test_acceptance_ctc_oracle_suite():
    start = time.monotonic()
    rng = np.random.default_rng(2024)
    cases = 0
    while cases < 200:
        t_frames = int(rng.integers(1, 7))
        vocab = int(rng.integers(2, 5))
        blank = vocab - 1
        label = list(rng.integers(0, blank, size=rng.integers(0, min(3, t_frames) + 1)))
        if min_frames_for(label) > t_frames:
            continue
        logits = rng.normal(0.0, 2.0, size=(t_frames, vocab))
        loss, grad = ctc_loss(logits, label, blank=blank)
        expected = ctc_loss_brute_force(logits, label, blank)
        assert abs(loss - expected) < 1e-6, (t_frames, vocab, label)
        fd = ctc_grad_fd(logits, label, blank, ctc_loss)
        rel = np.abs(grad - fd).max() / max(np.abs(fd).max(), 1e-6)
        assert rel < 1e-4, (t_frames, vocab, label, rel)
        cases += 1
    elapsed = time.monotonic() - start
    assert elapsed < SNR_BUDGET_S["ctc"], f"{elapsed:.1f}s"
    _report(f"ctc-oracle-suite (200 cases, {elapsed:.1f}s)")


# -- criterion: model gradient suite -------------------------------------

def test_acceptance_model_gradient_suite():
    start = time.monotonic()
    cfg = ModelConfig(n_layers=1, d_ff=4, n_heads=2, d_model=8, d_attn=8,
                      vocab_size=5, n_speakers=3, dropout=0.0)
    model = JointModel.init(cfg, seed=0).astype(np.float64)
    rng = np.random.default_rng(99)
    feats = rng.standard_normal((2, 5, cfg.d_model))
    mask = np.ones((2, 5), dtype=bool)
    mask[1, 3:] = False
    labels = [[0, 2], [1]]
    speakers = [0, 2]
    blank = cfg.vocab_size - 1

    def total_loss():
        speech, speaker = model.forward(feats, mask)
        total = 0.0
        for i, label in enumerate(labels):
            n_i = int(mask[i].sum())
            total += ctc_loss(speech.value[i, :n_i], label, blank=blank)[0]
            total += cross_entropy(speaker.value[i], speakers[i])[0]
        return total

    model.zero_grad()
    speech, speaker = model.forward(feats, mask)
    speech_seed = np.zeros_like(speech.value)
    speaker_seed = np.zeros_like(speaker.value)
    for i, label in enumerate(labels):
        n_i = int(mask[i].sum())
        speech_seed[i, :n_i] = ctc_loss(speech.value[i, :n_i], label, blank=blank)[1]
        speaker_seed[i] = cross_entropy(speaker.value[i], speakers[i])[1]
    ad.backward_multi([(speech, speech_seed), (speaker, speaker_seed)])

    eps = 1e-5
    worst = 0.0
    for name, param in model.params.items():
        analytic = param.grad
        fd = np.zeros_like(analytic)
        flat, fd_flat = param.value.reshape(-1), fd.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            hi = total_loss()
            flat[j] = orig - eps
            lo = total_loss()
            flat[j] = orig
            fd_flat[j] = (hi - lo) / (2 * eps)
        err = np.abs(analytic - fd).max()
        scale = max(np.abs(fd).max(), np.abs(analytic).max(), 1e-6)
        rel = err / scale
        # blocks whose gradient is structurally zero (e.g. the key bias)
        # leave only FD noise; accept them on an absolute bound instead
        if err >= 1e-8:
            worst = max(worst, rel)
            assert rel < 1e-4, f"{name}: rel err {rel:.2e}"
    elapsed = time.monotonic() - start
    assert elapsed < SNR_BUDGET_S["model_grad"], f"{elapsed:.1f}s"
    _report(f"model-gradient-suite (worst rel {worst:.1e}, {elapsed:.1f}s)")


# -- criterion: SNR exactness ---------------------------------------------

def test_acceptance_snr_exactness():
    sig = Waveform(speechlike_signal(1.0, SR, seed=7), SR)
    noi = noise_wave(duration_s=0.7, seed=8)
    worst = 0.0
    for snr_db in range(-15, 25, 5):
        out = mix_at_snr(sig, noi, SnrSpec(float(snr_db)))
        measured = 20.0 * np.log10(
            np.sqrt(np.mean(out.signal_part**2)) / np.sqrt(np.mean(out.noise_part**2))
        )
        worst = max(worst, abs(measured - snr_db))
        assert abs(measured - snr_db) < 1e-6, snr_db
    clean = mix_at_snr(sig, noi, SnrSpec(float("inf")))
    assert np.array_equal(clean.waveform.samples, sig.samples)
    _report(f"snr-exactness (worst error {worst:.2e} dB; +inf bitwise)")


# -- criterion: vocoder fidelity --------------------------------------------

def test_acceptance_vocoder_fidelity():
    per_band_means = []
    broadband = []
    from jointasr.audio import BandSpec

    spec64 = VocodeSpec(64)
    bands64 = spec64.bands()
    wide = [BandSpec(80.0, 7600.0)]
    for i in range(20):
        w = Waveform(speechlike_signal(1.5, SR, seed=1000 + i), SR)

        v1 = noise_vocode(w, VocodeSpec(1), rng_seed=i)
        e_in = envelope(bandpass_bank(w, wide)[0]).samples.astype(np.float64)
        e_out = envelope(bandpass_bank(v1, wide)[0]).samples.astype(np.float64)
        broadband.append(np.corrcoef(e_in, e_out)[0, 1])

        v64 = noise_vocode(w, spec64, rng_seed=i)
        again = noise_vocode(w, spec64, rng_seed=i)
        assert np.array_equal(v64.samples, again.samples)  # deterministic per seed
        rs = []
        for ib, ob in zip(bandpass_bank(w, bands64), bandpass_bank(v64, bands64)):
            ei = envelope(ib).samples.astype(np.float64)
            eo = envelope(ob).samples.astype(np.float64)
            if ei.std() > 1e-7 and eo.std() > 1e-7:
                rs.append(np.corrcoef(ei, eo)[0, 1])
        per_band_means.append(np.mean(rs))

    assert np.mean(broadband) >= 0.9, np.mean(broadband)
    assert np.mean(per_band_means) >= 0.8, np.mean(per_band_means)
    _report(
        f"vocoder-fidelity (1-ch broadband r {np.mean(broadband):.3f}, "
        f"64-ch per-band r {np.mean(per_band_means):.3f})"
    )


# -- criterion: sine-wave speech ----------------------------------------------

VOWELS = [
    (700.0, 1220.0, 2600.0),
    (320.0, 1100.0, 2450.0),
    (500.0, 1700.0, 2900.0),
]


def test_acceptance_sine_wave_speech():
    worst_dev = 0.0
    for targets in VOWELS:
        w = Waveform(synth_vowel(list(targets), 1.0, SR), SR)
        tracks = formant_tracks(w, 4)
        for track, target in zip(tracks[:3], targets):
            dev = abs(np.median(track.freq_hz) - target)
            worst_dev = max(worst_dev, dev)
            assert dev <= 75, (target, dev)

        out = sine_wave_speech(w)
        frame, hop = 400, 160
        spec = stft(out, frame, hop)
        freqs = np.fft.rfftfreq(frame, 1.0 / SR)
        track_hop = tracks[0].hop
        for f in range(2, spec.frames.shape[0] - 2):
            mag = np.abs(spec.frames[f])
            peak = mag.max()
            if peak < 1e-4:
                continue
            lo_i = f * hop // track_hop
            hi_i = min((f * hop + frame) // track_hop + 1, len(tracks[0].freq_hz))
            allowed = np.zeros_like(freqs, dtype=bool)
            for tr in tracks:
                for i in range(lo_i, hi_i):
                    allowed |= np.abs(freqs - tr.freq_hz[i]) <= 100.0
            outside = mag[~allowed]
            if outside.size:
                assert outside.max() <= peak * 10 ** (-20 / 20), f
    _report(f"sine-wave-speech (worst formant deviation {worst_dev:.1f} Hz)")


# -- criterion: metric oracle ---------------------------------------------------

def test_acceptance_metric_oracle():
    rng = np.random.default_rng(555)
    letters = list("abcde ")
    for _ in range(500):
        ref = "".join(rng.choice(letters, size=rng.integers(1, 13))).strip() or "a"
        hyp = "".join(rng.choice(letters, size=rng.integers(0, 13))).strip()
        counts = edit_counts(ref, hyp)
        assert counts.total == edit_distance_recursive(ref, hyp)
        assert cer(ref, hyp) == counts.total / len(ref)
        ref_words = ref.split(" ")
        hyp_words = hyp.split(" ") if hyp else []
        assert wer(ref, hyp) == edit_distance_recursive(
            tuple(ref_words), tuple(hyp_words)
        ) / len(ref_words)
    assert cer("a", "abcd") == 3.0  # CER is unbounded above 1
    _report("metric-oracle (500 exact matches; cer('a','abcd') = 3.0)")


# -- criterion: overfit suite -----------------------------------------------------

def test_acceptance_overfit_suite(tmp_path):
    start = time.monotonic()
    manifest = load_manifest(build_corpus(tmp_path, n_utterances=10, n_speakers=10, seed=99))
    cfg = ModelConfig(n_layers=1, d_ff=64, n_heads=2, d_attn=64, n_speakers=10, dropout=0.1)
    settings = TrainSettings(batch_size=10, heldout_fraction=0.0,
                             eval_every_epochs=25, max_steps=2000, stop_at_cer=0.04)
    result = train(cfg, manifest, epochs=2000, seed=7, settings=settings)
    elapsed = time.monotonic() - start
    assert result.steps <= 2000
    assert result.best_cer < 0.05, result.best_cer
    assert result.log[-1]["heldout_sra"] == 1.0
    assert elapsed < SNR_BUDGET_S["overfit"], f"{elapsed:.1f}s"
    _report(
        f"overfit-suite (CER {result.best_cer:.3f}, SRA 1.0, "
        f"{result.steps} steps, {elapsed:.0f}s)"
    )


# -- criterion: qualitative babble trend + determinism ----------------------------

@pytest.fixture(scope="module")
def trend_setup(tmp_path_factory):
    d = tmp_path_factory.mktemp("trend")
    manifest_path = build_corpus(d, n_utterances=50, n_speakers=10, seed=404)
    manifest = load_manifest(manifest_path)
    settings = TrainSettings(batch_size=10, heldout_fraction=0.0,
                             eval_every_epochs=20, max_steps=900, stop_at_cer=0.02)
    joint_cfg = ModelConfig(n_layers=1, d_ff=64, n_heads=2, d_attn=64,
                            n_speakers=10, dropout=0.1)
    abl_cfg = ModelConfig.ablation(n_layers=1, d_ff=64, n_heads=2, d_attn=64, dropout=0.1)
    joint = train(joint_cfg, manifest, epochs=2000, seed=31, settings=settings)
    ablation = train(abl_cfg, manifest, epochs=2000, seed=31, settings=settings)
    ckpt = d / "joint.jck1"
    save_checkpoint(joint.model, ckpt)
    return manifest_path, manifest, joint.model, ablation.model, ckpt


def test_acceptance_babble_trend(trend_setup):
    from jointasr.experiments import run_babble

    start = time.monotonic()
    _, manifest, joint_model, ablation_model, _ = trend_setup
    results = {}
    for tag, model in (("joint", joint_model), ("ablation", ablation_model)):
        rows, _ = run_babble(model, manifest, n_pairs=50, seed=77)
        assert [r.condition for r in rows] == [
            "-15", "-10", "-5", "0", "5", "10", "15", "20", "inf"
        ]
        by_cond = {r.condition: r.cer_mean for r in rows}
        assert by_cond["-15"] > by_cond["20"], (tag, by_cond)
        results[tag] = by_cond
    elapsed = time.monotonic() - start
    assert elapsed < SNR_BUDGET_S["trend"], f"{elapsed:.1f}s"
    gap_low = results["joint"]["-15"] - results["ablation"]["-15"]
    gap_high = results["joint"]["20"] - results["ablation"]["20"]
    direction = "joint better" if gap_low < 0 else "ablation better"
    # the joint-vs-ablation gap is reported, not asserted: at desk scale the
    # paper-scale claim is a hypothesis to examine
    _report(
        "babble-trend (joint CER {:.3f}@-15 > {:.3f}@+20; ablation {:.3f} > {:.3f}; "
        "gap at -15 dB: {:+.3f} [{}], at +20 dB: {:+.3f}; {:.0f}s)".format(
            results["joint"]["-15"], results["joint"]["20"],
            results["ablation"]["-15"], results["ablation"]["20"],
            gap_low, direction, gap_high, elapsed,
        )
    )


def test_acceptance_experiment_determinism(trend_setup, tmp_path):
    manifest_path, _, _, _, ckpt = trend_setup
    csv1, csv2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    svg1, svg2 = tmp_path / "r1.svg", tmp_path / "r2.svg"
    base = ["--seed", "13", "experiment", "babble",
            "--checkpoint", str(ckpt), "--manifest", str(manifest_path),
            "--pairs", "10"]
    assert cli_main(base + ["--out", str(csv1)]) == 0
    assert cli_main(base + ["--out", str(csv2)]) == 0
    assert cli_main(["plot", str(csv1), "--out", str(svg1)]) == 0
    assert cli_main(["plot", str(csv2), "--out", str(svg2)]) == 0
    assert csv1.read_bytes() == csv2.read_bytes()
    assert svg1.read_bytes() == svg2.read_bytes()
    assert len(csv1.read_text().strip().splitlines()) == 10  # header + 9 SNR rows
    _report("experiment-determinism (CSV and SVG bitwise identical)")


# -- criterion: exporter round trip (secondary; skipped until it is built) --------

EXPORTER_DIR = Path(__file__).resolve().parents[1] / "embed-export"


@pytest.mark.skipif(
    not (EXPORTER_DIR / "dist" / "cli.js").exists(),
    reason="secondary component not built",
)
def test_acceptance_exporter_round_trip(tmp_path):
    from jointasr.audio import write_wav
    from jointasr.embeddings import read_emb
    from jointasr.synthcorpus import synth_utterance

    manifest = tmp_path / "m.jsonl"
    with open(manifest, "w") as fh:
        for i in range(3):
            wav = tmp_path / f"u{i}.wav"
            write_wav(wav, synth_utterance("abc", i))
            fh.write(json.dumps({
                "audio": str(wav), "transcript": "abc", "speaker_id": f"s{i}",
            }) + "\n")
    out_dir = tmp_path / "emb"
    node = shutil.which("node")
    assert node, "node runtime required for the exporter"
    proc = subprocess.run(
        [node, str(EXPORTER_DIR / "dist" / "cli.js"),
         "--manifest", str(manifest), "--out", str(out_dir), "--encoder", "stub"],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    report = json.loads((out_dir / "report.json").read_text())
    assert report["count"] == 3 and report["failures"] == 0
    for i in range(3):
        speech = read_emb(out_dir / f"u{i}.speech.emb1")
        speaker = read_emb(out_dir / f"u{i}.speaker.emb1")
        assert speech.shape[1] == 512
        assert speaker.shape == (1, 192)
    _report("exporter-round-trip (3 files, checksums and dims validated)")
