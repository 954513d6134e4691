"""Character vocabulary, text normalization, and tokenization.

The vocabulary is fixed at 30 symbols: 'a'-'z' (0-25), space (26), pad
(27), sos (28), eos (29). The pad symbol doubles as the CTC blank; sos and
eos never appear in CTC labels and are stripped from decodes.
"""

import string
import unicodedata

LETTERS = string.ascii_lowercase
SPACE = 26
PAD = 27
SOS = 28
EOS = 29
BLANK = PAD
VOCAB_SIZE = 30

_CHAR_TO_INDEX = {c: i for i, c in enumerate(LETTERS)}
_CHAR_TO_INDEX[" "] = SPACE
_INDEX_TO_CHAR = {i: c for c, i in _CHAR_TO_INDEX.items()}


class EmptyTranscriptError(ValueError):
    """Normalization removed every character; the utterance is unusable."""


def normalize_text(raw: str) -> str:
    """Lowercase, fold accents (NFD + strip combining marks), keep only
    [a-z ], collapse runs of spaces, and trim."""
    decomposed = unicodedata.normalize("NFD", raw)
    folded = "".join(c for c in decomposed if not unicodedata.combining(c))
    kept = []
    for c in folded.lower():
        if c in _CHAR_TO_INDEX:
            kept.append(c)
        elif c.isspace():
            kept.append(" ")
    collapsed = " ".join("".join(kept).split())
    if not collapsed:
        raise EmptyTranscriptError(f"nothing left after normalizing {raw!r}")
    return collapsed


def tokenize(text: str) -> list:
    """Map normalized text to vocabulary indices."""
    try:
        return [_CHAR_TO_INDEX[c] for c in text]
    except KeyError as exc:
        raise ValueError(f"character {exc} is outside the vocabulary; normalize first")


def detokenize(tokens) -> str:
    """Inverse of tokenize; pad/sos/eos are dropped."""
    return "".join(_INDEX_TO_CHAR[t] for t in tokens if int(t) in _INDEX_TO_CHAR)
