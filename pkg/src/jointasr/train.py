"""Dual-task training loop: CTC + speaker cross-entropy over frozen
upstream embeddings, with held-out tracking and best-checkpoint selection."""

import csv
import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import text
from .data import EmbeddingCache, Manifest, default_provider, make_batches
from .losses import cross_entropy, ctc_loss, joint_loss
from .metrics import cer, ctc_greedy_decode, speaker_accuracy
from .model import JointModel, ModelConfig
from .optim import OptimState, adam_step

log = logging.getLogger(__name__)

METRICS_FIELDS = ["step", "joint_loss", "ctc_loss", "ce_loss", "heldout_cer", "heldout_sra"]


@dataclass
class TrainSettings:
    lr: float = 3e-4
    warmup_steps: int = 500
    clip_norm: float = 5.0
    batch_size: int = 8
    heldout_fraction: float = 0.1
    eval_every_epochs: int = 1
    max_steps: int = 0        # 0 = bounded by epochs only
    stop_at_cer: float = None  # early stop once held-out CER drops this low


@dataclass
class TrainResult:
    model: JointModel
    log: list = field(default_factory=list)
    best_cer: float = float("inf")
    steps: int = 0


def heldout_split(n_records: int, fraction: float, seed: int):
    """Deterministic split by seeded hash of the record index."""
    train_idx, held_idx = [], []
    for i in range(n_records):
        digest = hashlib.sha256(f"{seed}:{i}".encode()).digest()
        u = int.from_bytes(digest[:8], "little") / 2**64
        (held_idx if u < fraction else train_idx).append(i)
    if not train_idx:  # degenerate split; keep training possible
        train_idx, held_idx = held_idx, []
    return train_idx, held_idx


def evaluate(model: JointModel, manifest: Manifest, provider, indices=None,
             batch_size: int = 8, seed: int = 0):
    """Greedy-decode CER (macro average) and speaker accuracy.

    Returns (cer_mean, sra); sra is None for the speech-only ablation.
    """
    joint = model.config.use_speaker_branch
    cers = []
    preds, targets = [], []
    for batch in make_batches(manifest, batch_size, seed, provider,
                              epoch=0, joint=joint, indices=indices):
        speech, speaker = model.forward(batch.features, batch.mask)
        for i, label in enumerate(batch.labels):
            n_i = int(batch.mask[i].sum())
            hyp = ctc_greedy_decode(speech.value[i, :n_i])
            ref = text.detokenize(label)
            cers.append(cer(ref, hyp))
        if speaker is not None:
            preds.extend(np.argmax(speaker.value, axis=1).tolist())
            targets.extend(batch.speakers.tolist())
    if not cers:
        raise ValueError("nothing to evaluate")
    sra = speaker_accuracy(preds, targets) if preds else None
    return float(np.mean(cers)), sra


def _batch_losses(model, batch, rng):
    """Forward one batch; returns (ctc_mean, ce_mean, seed list for backward)."""
    joint = model.config.use_speaker_branch
    speech, speaker = model.forward(batch.features, batch.mask, train=True, rng=rng)
    b = batch.features.shape[0]
    speech_seed = np.zeros_like(speech.value)
    ctc_total = 0.0
    for i, label in enumerate(batch.labels):
        n_i = int(batch.mask[i].sum())
        loss_i, grad_i = ctc_loss(speech.value[i, :n_i], label)
        ctc_total += loss_i
        speech_seed[i, :n_i] = grad_i / b
    seeds = [(speech, speech_seed)]
    ce_total = 0.0
    if joint:
        speaker_seed = np.zeros_like(speaker.value)
        for i, target in enumerate(batch.speakers):
            loss_i, grad_i = cross_entropy(speaker.value[i], int(target))
            ce_total += loss_i
            speaker_seed[i] = grad_i / b
        seeds.append((speaker, speaker_seed))
    return ctc_total / b, (ce_total / b if joint else None), seeds


def train(config: ModelConfig, manifest: Manifest, epochs: int, seed: int,
          provider=None, settings: TrainSettings = None) -> TrainResult:
    """Train on a manifest; embeddings come from the (frozen) provider.

    Per evaluation interval, logs mean training losses plus held-out CER
    and speaker accuracy, and keeps the parameters with the best held-out
    CER. With heldout_fraction = 0 the training split doubles as the
    evaluation split (useful for overfit checks). Aborts if the joint loss
    is non-finite three steps in a row.
    """
    settings = settings or TrainSettings()
    provider = EmbeddingCache(provider or default_provider)
    if config.n_speakers < manifest.n_speakers:
        raise ValueError(
            f"manifest has {manifest.n_speakers} speakers; config allows {config.n_speakers}"
        )
    model = JointModel.init(config, seed=seed)
    dropout_rng = np.random.default_rng([seed, 0xD0])
    state = OptimState(lr=settings.lr, warmup_steps=settings.warmup_steps,
                       clip_norm=settings.clip_norm)

    train_idx, held_idx = heldout_split(len(manifest), settings.heldout_fraction, seed)
    eval_idx = held_idx if held_idx else train_idx

    result = TrainResult(model=model)
    if epochs == 0:
        return result

    best_params = None
    bad_streak = 0
    epoch_ctc, epoch_ce, epoch_joint = [], [], []
    for epoch in range(epochs):
        for batch in make_batches(manifest, settings.batch_size, seed, provider,
                                  epoch=epoch, joint=config.use_speaker_branch,
                                  indices=train_idx):
            ctc_mean, ce_mean, seeds = _batch_losses(model, batch, dropout_rng)
            step_loss = joint_loss(ctc_mean, ce_mean) if np.isfinite(ctc_mean) and (
                ce_mean is None or np.isfinite(ce_mean)) else float("nan")
            if not np.isfinite(step_loss):
                bad_streak += 1
                if bad_streak >= 3:
                    raise RuntimeError(
                        f"training diverged: non-finite loss for {bad_streak} "
                        f"consecutive steps at step {state.step}"
                    )
                continue
            bad_streak = 0
            epoch_ctc.append(ctc_mean)
            epoch_ce.append(ce_mean if ce_mean is not None else 0.0)
            epoch_joint.append(step_loss)
            model.zero_grad()
            ad.backward_multi(seeds)
            adam_step(model.params, state)
            if settings.max_steps and state.step >= settings.max_steps:
                break

        hit_cap = settings.max_steps and state.step >= settings.max_steps
        if (epoch + 1) % settings.eval_every_epochs == 0 or epoch == epochs - 1 or hit_cap:
            held_cer, held_sra = evaluate(model, manifest, provider,
                                          indices=eval_idx,
                                          batch_size=settings.batch_size, seed=seed)
            result.log.append({
                "step": state.step,
                "joint_loss": float(np.mean(epoch_joint)) if epoch_joint else float("nan"),
                "ctc_loss": float(np.mean(epoch_ctc)) if epoch_ctc else float("nan"),
                "ce_loss": float(np.mean(epoch_ce)) if epoch_ce else float("nan"),
                "heldout_cer": held_cer,
                "heldout_sra": held_sra,
            })
            epoch_ctc, epoch_ce, epoch_joint = [], [], []
            if held_cer < result.best_cer:
                result.best_cer = held_cer
                best_params = {k: v.value.copy() for k, v in model.params.items()}
            if settings.stop_at_cer is not None and held_cer <= settings.stop_at_cer and (
                    held_sra is None or held_sra == 1.0):
                break
        if hit_cap:
            break

    if best_params is not None:
        for k, v in model.params.items():
            v.value = best_params[k]
    result.steps = state.step
    return result


def write_metrics_csv(rows, path):
    """Metrics log serialization: one row per evaluation interval."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRICS_FIELDS)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            if out.get("heldout_sra") is None:
                out["heldout_sra"] = ""
            writer.writerow(out)
