"""Adam with bias correction, linear warmup, and global gradient clipping."""

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class OptimState:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    warmup_steps: int = 500
    step: int = 0
    skipped: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def effective_lr(self) -> float:
        if self.warmup_steps <= 0:
            return self.lr
        return self.lr * min(1.0, self.step / self.warmup_steps)


def global_grad_norm(params) -> float:
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float(np.square(p.grad, dtype=np.float64).sum())
    return float(np.sqrt(total))


def adam_step(params: dict, state: OptimState) -> bool:
    """One update over a name -> DiffArray parameter dict.

    Non-finite gradients skip the update entirely (logged and counted).
    Returns True when an update was applied.
    """
    for name, p in params.items():
        g = p.grad
        if g is None:
            raise ValueError(f"parameter {name} has no gradient; run backward first")
        if not np.all(np.isfinite(g)):
            state.skipped += 1
            log.warning("skipping optimizer step %d: non-finite gradient in %s",
                        state.step + 1, name)
            return False

    norm = global_grad_norm(params)
    clip_scale = 1.0
    if state.clip_norm > 0 and norm > state.clip_norm:
        clip_scale = state.clip_norm / norm

    state.step += 1
    lr_t = state.effective_lr()
    b1c = 1.0 - state.beta1**state.step
    b2c = 1.0 - state.beta2**state.step
    for name, p in params.items():
        g = p.grad.astype(np.float64) * clip_scale
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        m_hat = state.m[name] / b1c
        v_hat = state.v[name] / b2c
        update = lr_t * m_hat / (np.sqrt(v_hat) + state.eps)
        p.value = (p.value.astype(np.float64) - update).astype(p.value.dtype)
    return True
