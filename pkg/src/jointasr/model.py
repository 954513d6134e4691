"""The differentiable joint network: a transformer encoder over fused
704-d features, a per-frame character head for CTC, and a pooled speaker
head; plus the speech-only ablation variant (512-d input, no speaker head).

Width bookkeeping: the fused input (704-d, or 512-d for the ablation) is
projected to the stack's working width H at entry, where H is the
feed-forward node count of each transformer layer; the encoder output is
(B, N, H). Attention runs at an internal width of 512 (8 heads of 64) by
default regardless of H, which sidesteps 704 not dividing by 8.
"""

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import DiffArray

VOCAB_SIZE = 30
N_SPEAKERS = 200


class CheckpointError(Exception):
    """Corrupt checkpoint file or architecture mismatch on load."""


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int
    d_ff: int
    n_heads: int = 8
    d_model: int = 704
    d_attn: int = 512
    vocab_size: int = VOCAB_SIZE
    n_speakers: int = N_SPEAKERS
    use_speaker_branch: bool = True
    dropout: float = 0.1

    def __post_init__(self):
        if self.n_layers < 1 or self.d_ff < 1 or self.d_model < 1:
            raise ValueError("layer count and widths must be positive")
        if self.d_attn % self.n_heads != 0:
            raise ValueError("attention width must divide evenly across heads")
        # production vocabulary is 30; smaller values exist for gradient tests
        if self.vocab_size < 2:
            raise ValueError("need at least two output symbols")

    @classmethod
    def variant1(cls, **kw):
        return cls(n_layers=2, d_ff=1024, **kw)

    @classmethod
    def variant2(cls, **kw):
        return cls(n_layers=4, d_ff=512, **kw)

    @classmethod
    def variant3(cls, **kw):
        return cls(n_layers=4, d_ff=1024, **kw)

    @classmethod
    def ablation(cls, n_layers=4, d_ff=512, **kw):
        """Speech-only variant: 512-d input, no speaker branch."""
        return cls(n_layers=n_layers, d_ff=d_ff, d_model=512,
                   use_speaker_branch=False, **kw)


def sinusoidal_positions(n: int, width: int, dtype=np.float32) -> np.ndarray:
    pos = np.arange(n, dtype=np.float64)[:, None]
    idx = np.arange(width, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * (idx // 2) / width)
    pe = np.where(idx % 2 == 0, np.sin(angle), np.cos(angle))
    return pe.astype(dtype)


def _xavier(rng, fan_in, fan_out, dtype):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)


class JointModel:
    """Parameter container plus the define-by-run forward graph."""

    def __init__(self, config: ModelConfig, params: dict):
        self.config = config
        self.params = params

    # -- construction ------------------------------------------------

    @classmethod
    def init(cls, config: ModelConfig, seed: int, dtype=np.float32):
        """Deterministic initialization: Xavier-uniform weights, zero
        biases, unit layer-norm gains."""
        rng = np.random.default_rng(seed)
        p = {}

        def lin(name, fan_in, fan_out):
            p[f"{name}.w"] = ad.parameter(_xavier(rng, fan_in, fan_out, dtype))
            p[f"{name}.b"] = ad.parameter(np.zeros(fan_out, dtype))

        def norm(name, width):
            p[f"{name}.g"] = ad.parameter(np.ones(width, dtype))
            p[f"{name}.b"] = ad.parameter(np.zeros(width, dtype))

        c = config
        h = c.d_ff
        lin("input", c.d_model, h)
        for i in range(c.n_layers):
            base = f"layer{i}"
            lin(f"{base}.attn.q", h, c.d_attn)
            lin(f"{base}.attn.k", h, c.d_attn)
            lin(f"{base}.attn.v", h, c.d_attn)
            lin(f"{base}.attn.o", c.d_attn, h)
            norm(f"{base}.norm1", h)
            lin(f"{base}.ff.1", h, c.d_ff)
            lin(f"{base}.ff.2", c.d_ff, h)
            norm(f"{base}.norm2", h)
        lin("speech_head.1", h, h)
        lin("speech_head.2", h, c.vocab_size)
        if c.use_speaker_branch:
            lin("speaker_head.1", h, h)
            lin("speaker_head.2", h, c.n_speakers)
        return cls(c, p)

    def astype(self, dtype):
        for v in self.params.values():
            v.value = v.value.astype(dtype)
            v.grad = None
        return self

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def zero_grad(self):
        for v in self.params.values():
            v.zero_grad()

    def parameter_count(self) -> int:
        return sum(v.value.size for v in self.params.values())

    # -- forward -----------------------------------------------------

    def _check_mask(self, x, mask):
        if mask.shape != x.shape[:2]:
            raise ValueError("mask must be (B, N)")
        if np.any(mask.sum(axis=1) == 0):
            raise ValueError("a fully masked sequence has no attendable frames")

    def attention(self, x: DiffArray, mask: np.ndarray, layer: int,
                  train=False, rng=None) -> DiffArray:
        """Masked multi-head self-attention block (pre-residual output)."""
        c = self.config
        b, n, _ = x.shape
        hd = c.d_attn // c.n_heads
        p = self.params

        def heads(t):
            return ad.transpose(ad.reshape(t, (b, n, c.n_heads, hd)), (0, 2, 1, 3))

        q = heads(ad.linear(x, p[f"layer{layer}.attn.q.w"], p[f"layer{layer}.attn.q.b"]))
        k = heads(ad.linear(x, p[f"layer{layer}.attn.k.w"], p[f"layer{layer}.attn.k.b"]))
        v = heads(ad.linear(x, p[f"layer{layer}.attn.v.w"], p[f"layer{layer}.attn.v.b"]))

        scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(hd))
        additive = np.where(mask, 0.0, ad.MASK_NEG).astype(x.dtype)[:, None, None, :]
        attn = ad.softmax(ad.add_mask(scores, additive))
        if train and c.dropout > 0.0:
            attn = ad.dropout(attn, c.dropout, rng)
        ctx = ad.transpose(ad.matmul(attn, v), (0, 2, 1, 3))
        ctx = ad.reshape(ctx, (b, n, c.d_attn))
        return ad.linear(ctx, p[f"layer{layer}.attn.o.w"], p[f"layer{layer}.attn.o.b"])

    def encode(self, features: np.ndarray, mask: np.ndarray,
               train=False, rng=None, positional=True) -> DiffArray:
        """(B, N, d_model) fused features -> (B, N, H) encoder output."""
        c = self.config
        feats = np.asarray(features, dtype=self.dtype)
        if feats.ndim != 3 or feats.shape[2] != c.d_model:
            raise ValueError(f"expected (B, N, {c.d_model}) features, got {feats.shape}")
        self._check_mask(feats, mask)
        if train and c.dropout > 0.0 and rng is None:
            raise ValueError("training forward with dropout needs an rng")

        p = self.params
        x = ad.linear(DiffArray(feats), p["input.w"], p["input.b"])
        if positional:
            pe = sinusoidal_positions(feats.shape[1], c.d_ff, self.dtype)
            x = ad.add_mask(x, pe[None, :, :])
        for i in range(c.n_layers):
            att = self.attention(x, mask, i, train, rng)
            if train and c.dropout > 0.0:
                att = ad.dropout(att, c.dropout, rng)
            x = ad.layer_norm(ad.add(x, att), p[f"layer{i}.norm1.g"], p[f"layer{i}.norm1.b"])
            ff = ad.linear(ad.relu(ad.linear(x, p[f"layer{i}.ff.1.w"], p[f"layer{i}.ff.1.b"])),
                           p[f"layer{i}.ff.2.w"], p[f"layer{i}.ff.2.b"])
            if train and c.dropout > 0.0:
                ff = ad.dropout(ff, c.dropout, rng)
            x = ad.layer_norm(ad.add(x, ff), p[f"layer{i}.norm2.g"], p[f"layer{i}.norm2.b"])
        return x

    def speech_logits(self, encoded: DiffArray) -> DiffArray:
        """Per-frame character logits (B, N, vocab)."""
        p = self.params
        h = ad.relu(ad.linear(encoded, p["speech_head.1.w"], p["speech_head.1.b"]))
        return ad.linear(h, p["speech_head.2.w"], p["speech_head.2.b"])

    def speaker_logits(self, encoded: DiffArray, mask: np.ndarray) -> DiffArray:
        """Pooled talker logits (B, n_speakers)."""
        if not self.config.use_speaker_branch:
            raise ValueError("this configuration has no speaker branch")
        p = self.params
        pooled = ad.mean_pool_time(encoded, mask)
        h = ad.relu(ad.linear(pooled, p["speaker_head.1.w"], p["speaker_head.1.b"]))
        return ad.linear(h, p["speaker_head.2.w"], p["speaker_head.2.b"])

    def forward(self, features, mask, train=False, rng=None):
        """Run the full network. Returns (speech_logits, speaker_logits);
        the second is None for the speech-only ablation."""
        enc = self.encode(features, mask, train=train, rng=rng)
        speech = self.speech_logits(enc)
        speaker = self.speaker_logits(enc, mask) if self.config.use_speaker_branch else None
        checked = [speech.value] + ([speaker.value] if speaker is not None else [])
        ad.check_finite(checked, "model forward outputs")
        return speech, speaker


# -- checkpoint format (JCK1) -----------------------------------------

CKPT_MAGIC = b"JCK1"


def _config_json(config: ModelConfig) -> bytes:
    return json.dumps(asdict(config), sort_keys=True, separators=(",", ":")).encode()


def _byte_sum(chunks) -> int:
    total = 0
    for chunk in chunks:
        total = (total + int(np.frombuffer(chunk, dtype=np.uint8).sum(dtype=np.uint64))) % (1 << 64)
    return total


def save_checkpoint(model: JointModel, path):
    """Serialize config and all parameters (f32) with a trailing checksum."""
    cfg = _config_json(model.config)
    parts = [CKPT_MAGIC, struct.pack("<I", len(cfg)), cfg,
             struct.pack("<I", len(model.params))]
    for name in sorted(model.params):
        arr = np.ascontiguousarray(model.params[name].value, dtype="<f4")
        nb = name.encode()
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    blob = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(blob)
        fh.write(struct.pack("<Q", _byte_sum([blob])))


def load_checkpoint(path, expected_config: ModelConfig = None) -> JointModel:
    """Load a JCK1 file; verifies the checksum and, when given, that the
    stored architecture matches `expected_config`."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16 or data[:4] != CKPT_MAGIC:
        raise CheckpointError(f"{path}: not a JCK1 checkpoint")
    (stored_sum,) = struct.unpack("<Q", data[-8:])
    if _byte_sum([data[:-8]]) != stored_sum:
        raise CheckpointError(f"{path}: checksum mismatch")

    try:
        pos = 4
        (cfg_len,) = struct.unpack("<I", data[pos : pos + 4])
        pos += 4
        cfg_dict = json.loads(data[pos : pos + cfg_len].decode())
        pos += cfg_len
        config = ModelConfig(**cfg_dict)
        (n_tensors,) = struct.unpack("<I", data[pos : pos + 4])
        pos += 4
        params = {}
        for _ in range(n_tensors):
            (name_len,) = struct.unpack("<H", data[pos : pos + 2])
            pos += 2
            name = data[pos : pos + name_len].decode()
            pos += name_len
            (ndim,) = struct.unpack("<B", data[pos : pos + 1])
            pos += 1
            shape = struct.unpack(f"<{ndim}I", data[pos : pos + 4 * ndim])
            pos += 4 * ndim
            count = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(data[pos : pos + 4 * count], dtype="<f4")
            if arr.size != count:
                raise CheckpointError(f"{path}: truncated tensor {name}")
            pos += 4 * count
            params[name] = ad.parameter(arr.reshape(shape).copy())
        if pos != len(data) - 8:
            raise CheckpointError(f"{path}: trailing garbage")
    except (struct.error, json.JSONDecodeError, UnicodeDecodeError, TypeError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint ({exc})") from exc

    if expected_config is not None and config != expected_config:
        raise CheckpointError(
            f"{path}: checkpoint architecture {config} does not match expected {expected_config}"
        )
    return JointModel(config, params)
