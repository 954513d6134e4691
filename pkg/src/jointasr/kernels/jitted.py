"""Numba-compiled twins of the reference kernels.

Semantics must match `jointasr.kernels.reference` bit-for-bit up to float
reduction order; the test suite runs both backends against the same oracles.
"""

import numpy as np
from numba import njit

NEG_INF = -np.inf


@njit(cache=True)
def _lae(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + np.log1p(np.exp(b - a))
    return b + np.log1p(np.exp(a - b))


@njit(cache=True)
def _ctc_alpha_beta_jit(logp, ext, blank):
    T, V = logp.shape
    S = ext.shape[0]

    skip_ok = np.zeros(S, dtype=np.bool_)
    for s in range(2, S):
        skip_ok[s] = ext[s] != blank and ext[s] != ext[s - 2]

    em = np.empty((T, S))
    for t in range(T):
        for s in range(S):
            em[t, s] = logp[t, ext[s]]

    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = em[0, 0]
    if S > 1:
        alpha[0, 1] = em[0, 1]
    for t in range(1, T):
        for s in range(S):
            acc = alpha[t - 1, s]
            if s >= 1:
                acc = _lae(acc, alpha[t - 1, s - 1])
            if s >= 2 and skip_ok[s]:
                acc = _lae(acc, alpha[t - 1, s - 2])
            alpha[t, s] = acc + em[t, s]

    if S > 1:
        log_z = _lae(alpha[T - 1, S - 1], alpha[T - 1, S - 2])
    else:
        log_z = alpha[T - 1, S - 1]

    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = 0.0
    if S > 1:
        beta[T - 1, S - 2] = 0.0
    for t in range(T - 2, -1, -1):
        for s in range(S):
            acc = beta[t + 1, s] + em[t + 1, s]
            if s + 1 < S:
                acc = _lae(acc, beta[t + 1, s + 1] + em[t + 1, s + 1])
            if s + 2 < S and skip_ok[s + 2]:
                acc = _lae(acc, beta[t + 1, s + 2] + em[t + 1, s + 2])
            beta[t, s] = acc

    gamma = np.zeros((T, V))
    for t in range(T):
        for s in range(S):
            v = alpha[t, s] + beta[t, s] - log_z
            if v > -700.0:
                gamma[t, ext[s]] += np.exp(v)
    return -log_z, gamma


def ctc_alpha_beta(logp, ext, blank):
    return _ctc_alpha_beta_jit(
        np.ascontiguousarray(logp, dtype=np.float64),
        np.ascontiguousarray(ext, dtype=np.int64),
        blank,
    )


@njit(cache=True)
def _edit_ops_jit(a, b):
    n = a.shape[0]
    m = b.shape[0]
    dist = np.zeros((n + 1, m + 1), dtype=np.int32)
    for i in range(n + 1):
        dist[i, 0] = i
    for j in range(m + 1):
        dist[0, j] = j
    for i in range(1, n + 1):
        ai = a[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            best = dist[i - 1, j - 1] + cost
            up = dist[i - 1, j] + 1
            if up < best:
                best = up
            left = dist[i, j - 1] + 1
            if left < best:
                best = left
            dist[i, j] = best

    subs = 0
    dels = 0
    ins = 0
    i = n
    j = m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and dist[i, j] == dist[i - 1, j - 1]:
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and dist[i, j] == dist[i - 1, j - 1] + 1:
            subs += 1
            i -= 1
            j -= 1
        elif i > 0 and dist[i, j] == dist[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return subs, dels, ins


def edit_ops(a, b):
    return _edit_ops_jit(
        np.ascontiguousarray(a, dtype=np.int64),
        np.ascontiguousarray(b, dtype=np.int64),
    )


@njit(cache=True)
def _lpc_batch_jit(frames, order):
    nf, n = frames.shape
    poly = np.zeros((nf, order + 1))
    poly[:, 0] = 1.0
    ok = np.zeros(nf, dtype=np.bool_)
    r = np.empty(order + 1)
    a = np.empty(order)
    tmp = np.empty(order)
    for f in range(nf):
        x = frames[f]
        for k in range(order + 1):
            acc = 0.0
            for i in range(n - k):
                acc += x[i] * x[i + k]
            r[k] = acc
        if r[0] <= 0.0 or not np.isfinite(r[0]):
            continue
        err = r[0]
        for i in range(order):
            a[i] = 0.0
        for i in range(order):
            acc = r[i + 1]
            for j in range(i):
                acc -= a[j] * r[i - j]
            if err <= 1e-12 * r[0]:
                break
            k = acc / err
            for j in range(i):
                tmp[j] = a[j] - k * a[i - 1 - j]
            for j in range(i):
                a[j] = tmp[j]
            a[i] = k
            err *= 1.0 - k * k
        for j in range(order):
            poly[f, 1 + j] = -a[j]
        ok[f] = True
    return poly, ok


def lpc_batch(frames, order):
    return _lpc_batch_jit(np.ascontiguousarray(frames, dtype=np.float64), order)
