"""Independent f64 scalar-loop references used as oracles for the oracles.

Deliberately dumb: explicit Python loops, f64 arithmetic, direct textbook
formulas with no stabilization tricks and no shared code with the package.
"""

import math

import numpy as np


def naive_merge(va, sa, vb, sb):
    """v_out = (e^sa * va + e^sb * vb) / (e^sa + e^sb); s_out = log(e^sa + e^sb)."""
    seq, heads, dim = va.shape
    vout = np.zeros((seq, heads, dim), dtype=np.float64)
    sout = np.zeros((seq, heads), dtype=np.float64)
    for s in range(seq):
        for h in range(heads):
            ea = math.exp(float(sa[s, h]))
            eb = math.exp(float(sb[s, h]))
            for d in range(dim):
                vout[s, h, d] = (ea * float(va[s, h, d]) + eb * float(vb[s, h, d])) / (ea + eb)
            sout[s, h] = math.log(ea + eb)
    return vout, sout


def naive_rmsnorm(x, r, w, eps):
    """y = (x + r) / sqrt(mean((x + r)^2) + eps) * w, per row."""
    rows, width = x.shape
    y = np.zeros((rows, width), dtype=np.float64)
    for i in range(rows):
        acc = 0.0
        for j in range(width):
            h = float(x[i, j]) + float(r[i, j])
            acc += h * h
        scale = 1.0 / math.sqrt(acc / width + eps)
        for j in range(width):
            h = float(x[i, j]) + float(r[i, j])
            y[i, j] = h * scale * float(w[j])
    return y


def naive_silu_mul(x, g):
    """out = x / (1 + e^-x) * g, elementwise."""
    flat_x = x.reshape(-1)
    flat_g = g.reshape(-1)
    out = np.zeros(flat_x.shape[0], dtype=np.float64)
    for i in range(flat_x.shape[0]):
        xv = float(flat_x[i])
        out[i] = xv / (1.0 + math.exp(-xv)) * float(flat_g[i])
    return out.reshape(x.shape)


def naive_max_abs(a, b):
    """Elementwise max |a - b| via a plain loop."""
    fa = a.reshape(-1)
    fb = b.reshape(-1)
    worst = 0.0
    for i in range(fa.shape[0]):
        worst = max(worst, abs(float(fa[i]) - float(fb[i])))
    return worst
