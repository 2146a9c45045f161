"""Pure-numpy implementations of the hot numeric loops.

Selected by `_accel` when the compiled extension is unavailable (or when
KERNELFORGE_NO_ACCEL is set). All functions take C-contiguous f32 arrays and
perform their arithmetic in f32; shape/dtype validation happens upstream.
"""

from __future__ import annotations

import numpy as np


def merge_lse_f32(va, sa, vb, sb):
    """Log-sum-exp weighted merge of two partial attention states.

    va, vb: (n, d) value vectors; sa, sb: (n,) scores. Returns (vout, sout).
    Weights are stabilized by subtracting the per-pair max score.
    """
    smax = np.maximum(sa, sb)
    wa = np.exp(sa - smax, dtype=np.float32)
    wb = np.exp(sb - smax, dtype=np.float32)
    denom = wa + wb
    vout = (wa[:, None] * va + wb[:, None] * vb) / denom[:, None]
    sout = smax + np.log(denom, dtype=np.float32)
    return vout.astype(np.float32, copy=False), sout.astype(np.float32, copy=False)


def fused_add_rmsnorm_f32(x, r, w, eps):
    """Residual add followed by RMS normalization and a learned scale.

    x, r: (rows, d); w: (d,); eps: scalar added inside the square root.
    """
    h = x + r
    ms = np.mean(np.square(h, dtype=np.float32), axis=1, dtype=np.float32)
    inv = np.float32(1.0) / np.sqrt(ms + np.float32(eps), dtype=np.float32)
    return (h * inv[:, None] * w[None, :]).astype(np.float32, copy=False)


def silu_mul_f32(x, g):
    """Elementwise silu(x) * g over flat arrays: silu(z) = z / (1 + exp(-z))."""
    sig = np.float32(1.0) / (np.float32(1.0) + np.exp(-x, dtype=np.float32))
    return (x * sig * g).astype(np.float32, copy=False)


def max_abs_diff_f32(a, b):
    """Max elementwise |a - b| over flat f32 arrays; any non-finite input gives +inf."""
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        return float("inf")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))
