"""Pure-numpy implementations of the hot kernels.

Semantics reference for the numba backend: identical signatures, array
layouts, and tie-breaking. The partition-function tables use 1-based
indexing with padding rows/columns so empty intervals read as log(1)=0.
"""

import numpy as np

NEG_INF = float("-inf")


def inside_log(logw: np.ndarray, h: int) -> np.ndarray:
    """Fill the inside table logQ over substrings, in log domain.

    ``logw`` is an (n+2, n+2) matrix of log pair weights (−inf for
    forbidden pairs), 1-based. Returns logQ of the same shape where
    logQ[i, j] sums Boltzmann weights of all pseudoknot-free structures
    on [i..j]; entries with j < i (empty interval) are 0.
    """
    n = logw.shape[0] - 2
    logq = np.full_like(logw, NEG_INF)
    for i in range(n + 2):
        logq[i, : min(i, n + 1)] = 0.0
    for span in range(0, n):
        for i in range(1, n - span + 1):
            j = i + span
            base = logq[i + 1, j]
            lo = i + h + 1
            if lo > j:
                logq[i, j] = base
                continue
            ks = np.arange(lo, j + 1)
            terms = logw[i, ks] + logq[i + 1, ks - 1] + logq[ks + 1, j]
            m = max(terms.max(), base)
            logq[i, j] = m + np.log(np.exp(terms - m).sum() + np.exp(base - m))
    return logq


def outside_log(
    logq: np.ndarray, logw: np.ndarray, h: int, prune_threshold: float
) -> np.ndarray:
    """Pair log-probabilities via the enclosing-pair outside recursion.

    Pairs are processed by strictly decreasing span so every enclosing
    P(k,l) referenced is final. Enclosing pairs with probability below
    ``prune_threshold`` are skipped. Returns logP, (n+2, n+2), 1-based.
    """
    n = logq.shape[0] - 2
    logp = np.full_like(logq, NEG_INF)
    log_total = logq[1, n]
    log_prune = np.log(prune_threshold) if prune_threshold > 0.0 else NEG_INF
    live_k: list[int] = []
    live_l: list[int] = []
    live_lp: list[float] = []
    for span in range(n - 1, h, -1):
        ks = np.asarray(live_k, dtype=np.int64)
        ls = np.asarray(live_l, dtype=np.int64)
        lps = np.asarray(live_lp, dtype=np.float64)
        for i in range(1, n - span + 1):
            j = i + span
            if logw[i, j] == NEG_INF:
                continue
            logqb = logw[i, j] + logq[i + 1, j - 1]
            acc = logq[1, i - 1] + logqb + logq[j + 1, n] - log_total
            if ks.size:
                mask = (ks < i) & (ls > j)
                if mask.any():
                    km, lm = ks[mask], ls[mask]
                    terms = (
                        lps[mask]
                        + logq[km + 1, i - 1]
                        + logqb
                        + logq[j + 1, lm - 1]
                        - logq[km + 1, lm - 1]
                    )
                    m = max(terms.max(), acc)
                    acc = m + np.log(np.exp(terms - m).sum() + np.exp(acc - m))
            logp[i, j] = acc
        for i in range(1, n - span + 1):
            j = i + span
            lp = logp[i, j]
            if lp > NEG_INF and lp >= log_prune:
                live_k.append(i)
                live_l.append(j)
                live_lp.append(lp)
    return logp


def conv3x3_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """3x3 cross-correlation, stride 1, zero padding 1 (NCHW)."""
    n, c, hh, ww = x.shape
    o = w.shape[0]
    xp = np.zeros((n, c, hh + 2, ww + 2), dtype=x.dtype)
    xp[:, :, 1:-1, 1:-1] = x
    y = np.zeros((n, o, hh, ww), dtype=x.dtype)
    for u in range(3):
        for v in range(3):
            y += np.einsum(
                "oc,nchw->nohw", w[:, :, u, v], xp[:, :, u : u + hh, v : v + ww]
            )
    y += b.reshape(1, o, 1, 1)
    return y


def conv3x3_bwd(x: np.ndarray, w: np.ndarray, gy: np.ndarray):
    """Gradients of conv3x3_fwd w.r.t. input, weights, and bias."""
    n, c, hh, ww = x.shape
    o = w.shape[0]
    xp = np.zeros((n, c, hh + 2, ww + 2), dtype=x.dtype)
    xp[:, :, 1:-1, 1:-1] = x
    gxp = np.zeros_like(xp)
    gw = np.zeros_like(w)
    for u in range(3):
        for v in range(3):
            gw[:, :, u, v] = np.tensordot(
                gy, xp[:, :, u : u + hh, v : v + ww], axes=([0, 2, 3], [0, 2, 3])
            )
            gxp[:, :, u : u + hh, v : v + ww] += np.einsum(
                "nohw,oc->nchw", gy, w[:, :, u, v]
            )
    gb = gy.sum(axis=(0, 2, 3))
    gx = gxp[:, :, 1:-1, 1:-1]
    return gx, gw, gb


def maxpool2_fwd(x: np.ndarray):
    """2x2 max pooling, stride 2. Returns (pooled, window argmax).

    The argmax index is 0..3 in row-major window order; ties take the
    first index, matching the backward routing rule.
    """
    n, c, hh, ww = x.shape
    h2, w2 = hh // 2, ww // 2
    win = (
        x.reshape(n, c, h2, 2, w2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h2, w2, 4)
    )
    idx = win.argmax(axis=-1)
    y = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return y, idx


def maxpool2_bwd(idx: np.ndarray, gy: np.ndarray, hh: int, ww: int) -> np.ndarray:
    """Route pooled gradients back to each window's argmax position."""
    n, c, h2, w2 = gy.shape
    gwin = np.zeros((n, c, h2, w2, 4), dtype=gy.dtype)
    np.put_along_axis(gwin, idx[..., None], gy[..., None], axis=-1)
    return (
        gwin.reshape(n, c, h2, w2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, hh, ww)
    )
