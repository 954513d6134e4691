"""Minimal reverse-mode autodiff over numpy arrays.

A DiffArray pairs a value plane with a gradient plane; operations record
backward rules on a tape that `backward()` replays in reverse topological
order. Gradients accumulate additively, so shared subexpressions (e.g. the
encoder trunk feeding both heads) just work.

Masked positions use a large negative additive constant rather than -inf so
that the all-finite invariant holds after every forward and backward.
"""

import numpy as np

MASK_NEG = -1e9


class DiffArray:
    """Shaped numeric array with value and gradient planes."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, value, requires_grad=False):
        self.value = np.asarray(value)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g.astype(self.value.dtype, copy=False)

    def backward(self, seed_grad):
        """Propagate d(loss)/d(self) = seed_grad back to every ancestor."""
        backward_multi([(self, seed_grad)])

    def __repr__(self):
        return f"DiffArray(shape={self.value.shape}, dtype={self.value.dtype})"


def backward_multi(seeded_roots):
    """One reverse pass over the union graph of several output nodes.

    `seeded_roots` is a list of (DiffArray, gradient) pairs. Sharing one
    pass keeps gradients through shared subgraphs (e.g. the encoder trunk
    under both heads) counted exactly once.
    """
    topo = []
    seen = set()
    for root, _ in seeded_roots:
        if id(root) in seen:
            continue
        stack = [(root, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
    for root, seed in seeded_roots:
        seed = np.asarray(seed, dtype=root.value.dtype)
        if seed.shape != root.value.shape:
            raise ValueError(f"seed gradient shape {seed.shape} != {root.value.shape}")
        root._accumulate(seed)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def _node(value, parents, backward_fn):
    out = DiffArray(value, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._backward = backward_fn
    return out


def _reduce_to(g, shape):
    """Sum a broadcast gradient back down to the original operand shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def constant(value, dtype=None):
    return DiffArray(np.asarray(value, dtype=dtype))


def parameter(value):
    return DiffArray(np.asarray(value), requires_grad=True)


def add(a: DiffArray, b: DiffArray) -> DiffArray:
    def bwd(g):
        if a.requires_grad:
            a._accumulate(_reduce_to(g, a.value.shape))
        if b.requires_grad:
            b._accumulate(_reduce_to(g, b.value.shape))

    return _node(a.value + b.value, (a, b), bwd)


def mul(a: DiffArray, b: DiffArray) -> DiffArray:
    def bwd(g):
        if a.requires_grad:
            a._accumulate(_reduce_to(g * b.value, a.value.shape))
        if b.requires_grad:
            b._accumulate(_reduce_to(g * a.value, b.value.shape))

    return _node(a.value * b.value, (a, b), bwd)


def scale(a: DiffArray, s: float) -> DiffArray:
    def bwd(g):
        a._accumulate(g * s)

    return _node(a.value * s, (a,), bwd)


def matmul(a: DiffArray, b: DiffArray) -> DiffArray:
    def bwd(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.value, -1, -2)
            a._accumulate(_reduce_to(ga, a.value.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.value, -1, -2) @ g
            b._accumulate(_reduce_to(gb, b.value.shape))

    return _node(a.value @ b.value, (a, b), bwd)


def relu(a: DiffArray) -> DiffArray:
    keep = a.value > 0

    def bwd(g):
        a._accumulate(g * keep)

    return _node(np.where(keep, a.value, 0), (a,), bwd)


def reshape(a: DiffArray, shape) -> DiffArray:
    def bwd(g):
        a._accumulate(g.reshape(a.value.shape))

    return _node(a.value.reshape(shape), (a,), bwd)


def transpose(a: DiffArray, axes) -> DiffArray:
    inverse = np.argsort(axes)

    def bwd(g):
        a._accumulate(np.transpose(g, inverse))

    return _node(np.transpose(a.value, axes), (a,), bwd)


def softmax(a: DiffArray, axis: int = -1) -> DiffArray:
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        inner = (g * p).sum(axis=axis, keepdims=True)
        a._accumulate(p * (g - inner))

    return _node(p, (a,), bwd)


def layer_norm(a: DiffArray, gain: DiffArray, bias: DiffArray, eps: float = 1e-5) -> DiffArray:
    mean = a.value.mean(axis=-1, keepdims=True)
    centered = a.value - mean
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv_std

    def bwd(g):
        if gain.requires_grad:
            gain._accumulate(_reduce_to(g * x_hat, gain.value.shape))
        if bias.requires_grad:
            bias._accumulate(_reduce_to(g, bias.value.shape))
        if a.requires_grad:
            gg = g * gain.value
            m1 = gg.mean(axis=-1, keepdims=True)
            m2 = (gg * x_hat).mean(axis=-1, keepdims=True)
            a._accumulate((gg - m1 - x_hat * m2) * inv_std)

    return _node(x_hat * gain.value + bias.value, (a, gain, bias), bwd)


def dropout(a: DiffArray, p: float, rng: np.random.Generator) -> DiffArray:
    if p <= 0.0:
        return a
    keep = rng.random(a.value.shape) >= p
    factor = 1.0 / (1.0 - p)

    def bwd(g):
        a._accumulate(g * keep * factor)

    return _node(np.where(keep, a.value * factor, 0), (a,), bwd)


def mean_pool_time(a: DiffArray, mask: np.ndarray) -> DiffArray:
    """Mask-aware mean over the time axis of a (B, N, H) array."""
    if mask.shape != a.value.shape[:2]:
        raise ValueError("mask must be (B, N)")
    counts = mask.sum(axis=1)
    if np.any(counts == 0):
        raise ValueError("cannot pool a fully masked sequence")
    m = mask.astype(a.value.dtype)[:, :, None]
    pooled = (a.value * m).sum(axis=1) / counts[:, None]

    def bwd(g):
        a._accumulate(g[:, None, :] * m / counts[:, None, None])

    return _node(pooled, (a, DiffArray(counts)), bwd)


def add_mask(a: DiffArray, additive: np.ndarray) -> DiffArray:
    """Add a constant (no-grad) additive mask, e.g. MASK_NEG on padding."""

    def bwd(g):
        a._accumulate(g)

    return _node(a.value + additive, (a,), bwd)


def linear(x: DiffArray, weight: DiffArray, bias: DiffArray) -> DiffArray:
    return add(matmul(x, weight), bias)


def check_finite(arrays, label: str):
    for arr in arrays:
        if arr is not None and not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite values detected in {label}")
