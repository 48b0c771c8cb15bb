"""Numba-compiled implementations of the hot kernels.

Same signatures and semantics as ``numpy_impl``; see that module for the
table layouts. Kernels are single-threaded so results are deterministic
and independent of thread count.
"""

import math

import numpy as np
from numba import njit

NEG_INF = float("-inf")


@njit(cache=True)
def _logadd(a, b):
    # log(exp(a) + exp(b)) without overflow; tolerates -inf on either side
    if a < b:
        a, b = b, a
    if b == NEG_INF:
        return a
    return a + math.log1p(math.exp(b - a))


@njit(cache=True)
def inside_log(logw, h):
    n = logw.shape[0] - 2
    logq = np.full_like(logw, NEG_INF)
    for i in range(n + 2):
        for j in range(min(i, n + 1)):
            logq[i, j] = 0.0
    for span in range(0, n):
        for i in range(1, n - span + 1):
            j = i + span
            acc = logq[i + 1, j]
            for k in range(i + h + 1, j + 1):
                if logw[i, k] == NEG_INF:
                    continue
                acc = _logadd(acc, logw[i, k] + logq[i + 1, k - 1] + logq[k + 1, j])
            logq[i, j] = acc
    return logq


@njit(cache=True)
def outside_log(logq, logw, h, prune_threshold):
    n = logq.shape[0] - 2
    logp = np.full_like(logq, NEG_INF)
    log_total = logq[1, n]
    log_prune = math.log(prune_threshold) if prune_threshold > 0.0 else NEG_INF
    cap = n * (n + 1) // 2 + 1
    live_k = np.empty(cap, dtype=np.int64)
    live_l = np.empty(cap, dtype=np.int64)
    live_lp = np.empty(cap, dtype=np.float64)
    n_live = 0
    for span in range(n - 1, h, -1):
        for i in range(1, n - span + 1):
            j = i + span
            if logw[i, j] == NEG_INF:
                continue
            logqb = logw[i, j] + logq[i + 1, j - 1]
            acc = logq[1, i - 1] + logqb + logq[j + 1, n] - log_total
            for t in range(n_live):
                k = live_k[t]
                l = live_l[t]
                if k < i and l > j:
                    acc = _logadd(
                        acc,
                        live_lp[t]
                        + logq[k + 1, i - 1]
                        + logqb
                        + logq[j + 1, l - 1]
                        - logq[k + 1, l - 1],
                    )
            logp[i, j] = acc
        for i in range(1, n - span + 1):
            j = i + span
            lp = logp[i, j]
            if lp > NEG_INF and lp >= log_prune:
                live_k[n_live] = i
                live_l[n_live] = j
                live_lp[n_live] = lp
                n_live += 1
    return logp


@njit(cache=True)
def conv3x3_fwd(x, w, b):
    n, c, hh, ww = x.shape
    o = w.shape[0]
    xp = np.zeros((n, c, hh + 2, ww + 2), dtype=x.dtype)
    xp[:, :, 1 : hh + 1, 1 : ww + 1] = x
    y = np.empty((n, o, hh, ww), dtype=x.dtype)
    for nn in range(n):
        for oo in range(o):
            for i in range(hh):
                for j in range(ww):
                    y[nn, oo, i, j] = b[oo]
            for cc in range(c):
                for u in range(3):
                    for v in range(3):
                        wv = w[oo, cc, u, v]
                        for i in range(hh):
                            for j in range(ww):
                                y[nn, oo, i, j] += wv * xp[nn, cc, i + u, j + v]
    return y


@njit(cache=True)
def conv3x3_bwd(x, w, gy):
    n, c, hh, ww = x.shape
    o = w.shape[0]
    xp = np.zeros((n, c, hh + 2, ww + 2), dtype=x.dtype)
    xp[:, :, 1 : hh + 1, 1 : ww + 1] = x
    gxp = np.zeros((n, c, hh + 2, ww + 2), dtype=x.dtype)
    gw = np.zeros_like(w)
    gb = np.zeros_like(w[:, 0, 0, 0])
    for nn in range(n):
        for oo in range(o):
            s = 0.0
            for i in range(hh):
                for j in range(ww):
                    s += gy[nn, oo, i, j]
            gb[oo] += s
            for cc in range(c):
                for u in range(3):
                    for v in range(3):
                        wv = w[oo, cc, u, v]
                        acc = 0.0
                        for i in range(hh):
                            for j in range(ww):
                                g = gy[nn, oo, i, j]
                                acc += g * xp[nn, cc, i + u, j + v]
                                gxp[nn, cc, i + u, j + v] += g * wv
                        gw[oo, cc, u, v] += acc
    gx = gxp[:, :, 1 : hh + 1, 1 : ww + 1].copy()
    return gx, gw, gb


@njit(cache=True)
def maxpool2_fwd(x):
    n, c, hh, ww = x.shape
    h2, w2 = hh // 2, ww // 2
    y = np.empty((n, c, h2, w2), dtype=x.dtype)
    idx = np.empty((n, c, h2, w2), dtype=np.int64)
    for nn in range(n):
        for cc in range(c):
            for i in range(h2):
                for j in range(w2):
                    best = x[nn, cc, 2 * i, 2 * j]
                    arg = 0
                    # row-major window scan; strict > keeps the first max
                    for t in range(1, 4):
                        u, v = t // 2, t % 2
                        val = x[nn, cc, 2 * i + u, 2 * j + v]
                        if val > best:
                            best = val
                            arg = t
                    y[nn, cc, i, j] = best
                    idx[nn, cc, i, j] = arg
    return y, idx


@njit(cache=True)
def maxpool2_bwd(idx, gy, hh, ww):
    n, c, h2, w2 = gy.shape
    gx = np.zeros((n, c, hh, ww), dtype=gy.dtype)
    for nn in range(n):
        for cc in range(c):
            for i in range(h2):
                for j in range(w2):
                    t = idx[nn, cc, i, j]
                    gx[nn, cc, 2 * i + t // 2, 2 * j + t % 2] = gy[nn, cc, i, j]
    return gx
