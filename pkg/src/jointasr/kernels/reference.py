"""Pure numpy/Python implementations of the hot inner-loop kernels.

These are the readable reference versions; `jointasr.kernels.jitted` holds
numba-compiled twins with identical semantics. The active backend is chosen
in `jointasr.kernels.__init__` (env var JOINTASR_NUMBA).
"""

import numpy as np

NEG_INF = -np.inf


def ctc_alpha_beta(logp, ext, blank):
    """Forward-backward over a blank-extended label in log space.

    logp : (T, V) float64 per-frame log-probabilities (already normalized).
    ext  : (S,) int64 blank-extended label, S = 2*L + 1.
    blank: blank symbol index.

    Returns (loss, gamma) where loss = -log P(label | logp) and gamma is the
    (T, V) posterior symbol occupancy, so the loss gradient w.r.t. the logits
    is softmax(logits) - gamma.
    """
    T, V = logp.shape
    S = ext.shape[0]
    # s -> s-2 skip is legal only onto a non-blank that differs from ext[s-2]
    skip_ok = np.zeros(S, dtype=bool)
    if S > 2:
        skip_ok[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])

    em = logp[:, ext]  # (T, S) emission log-probs per extended state

    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = em[0, 0]
    if S > 1:
        alpha[0, 1] = em[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        step = np.full(S, NEG_INF)
        step[1:] = prev[:-1]
        skip = np.full(S, NEG_INF)
        if S > 2:
            skip[2:] = np.where(skip_ok[2:], prev[:-2], NEG_INF)
        alpha[t] = np.logaddexp(np.logaddexp(prev, step), skip) + em[t]

    if S > 1:
        log_z = np.logaddexp(alpha[T - 1, S - 1], alpha[T - 1, S - 2])
    else:
        log_z = alpha[T - 1, S - 1]

    # beta excludes the emission at t, so alpha_t + beta_t sums to log P at any t
    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = 0.0
    if S > 1:
        beta[T - 1, S - 2] = 0.0
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1] + em[t + 1]
        step = np.full(S, NEG_INF)
        step[:-1] = nxt[1:]
        skip = np.full(S, NEG_INF)
        if S > 2:
            skip[:-2] = np.where(skip_ok[2:], nxt[2:], NEG_INF)
        beta[t] = np.logaddexp(np.logaddexp(nxt, step), skip)

    gamma = np.zeros((T, V))
    post = np.exp(alpha + beta - log_z)
    for s in range(S):
        gamma[:, ext[s]] += post[:, s]
    return -log_z, gamma


def edit_ops(a, b):
    """Unit-cost edit distance between int sequences with op counts.

    Backtrace preference is match, then substitution, then deletion, then
    insertion, which fixes the (subs, dels, ins) split on ties.

    Returns (subs, dels, ins); dels are symbols of `a` absent from `b`.
    """
    n, m = len(a), len(b)
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

    subs = dels = ins = 0
    i, j = n, m
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


def _lpc_frame(x, order, a_out):
    """Levinson-Durbin on one frame; fills a_out[0..order-1]. Returns True if solvable."""
    n = x.shape[0]
    r = np.empty(order + 1)
    for k in range(order + 1):
        r[k] = np.dot(x[: n - k], x[k:])
    if r[0] <= 0.0 or not np.isfinite(r[0]):
        return False
    err = r[0]
    a_out[:] = 0.0
    tmp = np.empty(order)
    for i in range(order):
        acc = r[i + 1]
        for j in range(i):
            acc -= a_out[j] * r[i - j]
        if err <= 1e-12 * r[0]:
            break  # near-perfectly predictable already (e.g. pure tones)
        k = acc / err
        tmp[:i] = a_out[:i] - k * a_out[:i][::-1]
        a_out[:i] = tmp[:i]
        a_out[i] = k
        err *= 1.0 - k * k
    return True


def lpc_batch(frames, order):
    """Autocorrelation-method LPC for each row of `frames`.

    Returns (poly, ok): poly is (F, order+1) with poly[:, 0] = 1 and
    poly[:, 1:] = -a (the inverse-filter polynomial whose roots carry the
    resonances); ok flags frames with positive energy.
    """
    nf = frames.shape[0]
    poly = np.zeros((nf, order + 1))
    poly[:, 0] = 1.0
    ok = np.zeros(nf, dtype=bool)
    a = np.zeros(order)
    for f in range(nf):
        if _lpc_frame(frames[f], order, a):
            poly[f, 1:] = -a
            ok[f] = True
    return poly, ok
