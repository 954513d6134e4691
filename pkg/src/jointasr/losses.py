"""Training losses: CTC over the blank-extended label (forward-backward in
log space), speaker cross-entropy, and their unweighted sum. Each returns
the analytic gradient w.r.t. its logits; the model's autodiff tape carries
those gradients back to the parameters."""

import numpy as np

from . import text
from .kernels import ctc_alpha_beta


class InfeasibleLabelError(ValueError):
    """The label cannot be aligned to this many frames (too few, given
    repeats); distinct from numeric failure."""


def _log_softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def min_frames_for(label) -> int:
    """Fewest frames that can emit `label`: its length plus one separator
    blank per adjacent repeat."""
    label = list(label)
    repeats = sum(1 for a, b in zip(label, label[1:]) if a == b)
    return len(label) + repeats


def ctc_loss(logits: np.ndarray, label, blank: int = text.BLANK):
    """CTC negative log-likelihood and its gradient w.r.t. the logits.

    logits: (T, V) unnormalized scores. label: token indices, excluding
    blank/pad/sos/eos. Computation runs in float64 regardless of input
    dtype; loss is exact to the forward-backward recursion (no sampling).
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ValueError("ctc_loss expects (T, V) logits")
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    t_frames, vocab = logits.shape
    label = np.asarray(list(label), dtype=np.int64)
    if label.size and (label.min() < 0 or label.max() >= vocab):
        raise ValueError("label index outside the vocabulary")
    if blank in label:
        raise ValueError("labels must not contain the blank symbol")
    if np.any(label == text.SOS) or np.any(label == text.EOS):
        raise ValueError("labels must not contain sos/eos")
    needed = min_frames_for(label)
    if t_frames < needed:
        raise InfeasibleLabelError(
            f"label of length {label.size} (min {needed} frames) cannot align to {t_frames} frames"
        )

    ext = np.full(2 * label.size + 1, blank, dtype=np.int64)
    ext[1::2] = label
    logp = _log_softmax(logits)
    loss, gamma = ctc_alpha_beta(logp, ext, blank)
    grad = np.exp(logp) - gamma
    return float(loss), grad


def cross_entropy(logits: np.ndarray, target: int):
    """Softmax cross-entropy over one logit vector; gradient is
    softmax - onehot."""
    logits = np.asarray(logits, dtype=np.float64).reshape(-1)
    if not (0 <= target < logits.shape[0]):
        raise ValueError(f"target {target} outside [0, {logits.shape[0]})")
    logp = _log_softmax(logits)
    grad = np.exp(logp)
    grad[target] -= 1.0
    return float(-logp[target]), grad


def joint_loss(ctc: float, ce: float = None) -> float:
    """Unweighted sum of the two task losses; the ablation passes ce=None."""
    if not np.isfinite(ctc) or (ce is not None and not np.isfinite(ce)):
        raise ValueError("loss terms must be finite")
    return float(ctc) if ce is None else float(ctc) + float(ce)
