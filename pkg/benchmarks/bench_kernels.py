"""Benchmark the numba-compiled kernels against the pure numpy/Python
reference path on representative workloads.

Run from the repo root:

    python benchmarks/bench_kernels.py

The same selection is what JOINTASR_NUMBA toggles at import time; this
script imports both backends explicitly so one process can compare them.
"""

import time

import numpy as np

from jointasr.kernels import jitted, reference


def _log_softmax(x):
    s = x - x.max(axis=-1, keepdims=True)
    return s - np.log(np.exp(s).sum(axis=-1, keepdims=True))


def timeit(fn, *args, repeat=5):
    fn(*args)  # warm-up (and numba compilation)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_ctc():
    rng = np.random.default_rng(0)
    t_frames, vocab, label_len = 200, 30, 40
    logp = _log_softmax(rng.normal(size=(t_frames, vocab)))
    label = rng.integers(0, 26, size=label_len)
    ext = np.full(2 * label_len + 1, 27, dtype=np.int64)
    ext[1::2] = label
    return {
        "workload": f"ctc_alpha_beta T={t_frames} V={vocab} L={label_len}",
        "reference": timeit(reference.ctc_alpha_beta, logp, ext, 27),
        "numba": timeit(jitted.ctc_alpha_beta, logp, ext, 27),
    }


def bench_edit():
    rng = np.random.default_rng(1)
    a = rng.integers(0, 27, size=400).astype(np.int64)
    b = rng.integers(0, 27, size=400).astype(np.int64)
    return {
        "workload": "edit_ops 400x400",
        "reference": timeit(reference.edit_ops, a, b),
        "numba": timeit(jitted.edit_ops, a, b),
    }


def bench_lpc():
    rng = np.random.default_rng(2)
    frames = rng.normal(size=(300, 400))
    return {
        "workload": "lpc_batch 300 frames x 400 samples, order 12",
        "reference": timeit(reference.lpc_batch, frames, 12),
        "numba": timeit(jitted.lpc_batch, frames, 12),
    }


def main():
    rows = [bench_ctc(), bench_edit(), bench_lpc()]
    width = max(len(r["workload"]) for r in rows)
    print(f"{'workload':<{width}}  {'reference':>12}  {'numba':>12}  {'speedup':>8}")
    for r in rows:
        speedup = r["reference"] / r["numba"]
        print(
            f"{r['workload']:<{width}}  {r['reference'] * 1e3:>10.2f}ms  "
            f"{r['numba'] * 1e3:>10.2f}ms  {speedup:>7.1f}x"
        )


if __name__ == "__main__":
    main()
