"""Evaluation metrics: edit-operation counts, character and word error
rates, CTC greedy decoding, and speaker accuracy."""

from dataclasses import dataclass

import numpy as np

from . import text
from .kernels import edit_ops


@dataclass(frozen=True)
class EditCounts:
    substitutions: int
    deletions: int
    insertions: int

    @property
    def total(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def _codes(items, table=None):
    if table is None:
        return np.array([ord(c) for c in items], dtype=np.int64)
    return np.array([table.setdefault(x, len(table)) for x in items], dtype=np.int64)


def edit_counts(ref: str, hyp: str) -> EditCounts:
    """Unit-cost edit operations turning `ref` into `hyp` (character level).
    Backtrace ties resolve substitution-first, so counts are reproducible."""
    s, d, i = edit_ops(_codes(ref), _codes(hyp))
    return EditCounts(int(s), int(d), int(i))


def cer(ref: str, hyp: str) -> float:
    """Character error rate: (S + D + I) / len(ref). May exceed 1."""
    if not ref:
        raise ValueError("CER is undefined for an empty reference")
    return edit_counts(ref, hyp).total / len(ref)


def corpus_cer(refs, hyps, average: str = "macro") -> float:
    """Corpus-level CER. "macro" (the default reporting statistic) means
    each utterance's CER weighs equally; "micro" pools edit operations over
    the corpus before dividing."""
    refs, hyps = list(refs), list(hyps)
    if len(refs) != len(hyps) or not refs:
        raise ValueError("need equal-length, non-empty ref/hyp lists")
    if average == "macro":
        return float(np.mean([cer(r, h) for r, h in zip(refs, hyps)]))
    if average == "micro":
        total = sum(edit_counts(r, h).total for r, h in zip(refs, hyps))
        chars = sum(len(r) for r in refs)
        if chars == 0:
            raise ValueError("micro CER needs non-empty references")
        return total / chars
    raise ValueError(f"unknown averaging mode {average!r}")


def wer(ref: str, hyp: str) -> float:
    """Word error rate over space-delimited words."""
    ref_words = ref.split(" ") if ref else []
    if not ref or not ref_words:
        raise ValueError("WER is undefined for an empty reference")
    table = {}
    s, d, i = edit_ops(_codes(ref_words, table), _codes(hyp.split(" ") if hyp else [], table))
    return (int(s) + int(d) + int(i)) / len(ref_words)


def ctc_greedy_decode(logits: np.ndarray, blank: int = text.BLANK) -> str:
    """Frame-wise argmax, collapse repeats, drop blanks, strip sos/eos.
    Argmax ties resolve to the lowest index."""
    logits = np.asarray(logits)
    if logits.ndim != 2:
        raise ValueError("expected (T, V) logits")
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    path = np.argmax(logits, axis=1)
    out = []
    prev = -1
    for sym in path:
        if sym != prev and sym != blank:
            out.append(int(sym))
        prev = sym
    return text.detokenize(out)


def speaker_accuracy(predictions, targets) -> float:
    """Fraction of exact top-1 matches."""
    preds = np.asarray(predictions)
    targs = np.asarray(targets)
    if preds.shape != targs.shape or preds.size == 0:
        raise ValueError("need equal-length, non-empty prediction/target lists")
    return float(np.mean(preds == targs))
