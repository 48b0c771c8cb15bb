"""Dot-plot rendering, bilinear resizing, pair composition, and PGM I/O.

Images stay in floating point through the whole pipeline and are
quantized to 8 bits exactly once, at serialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bppm import Bppm


@dataclass
class GrayImage:
    """Square single-channel image, intensities in [0,1], row-major."""

    side: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.side < 1:
            raise ValueError(f"side must be positive, got {self.side}")
        if self.pixels.shape != (self.side, self.side):
            raise ValueError(
                f"pixel shape {self.pixels.shape} does not match side {self.side}"
            )
        if np.any(self.pixels < 0) or np.any(self.pixels > 1):
            raise ValueError("intensities outside [0, 1]")


def bppm_to_image(b: Bppm, use_sqrt: bool = False) -> GrayImage:
    """Symmetric dot-plot: pixel(i,j) = pixel(j,i) = P(i,j), diagonal 0.

    ``use_sqrt`` renders sqrt(P) instead, the dot-area convention used
    by some viewers; linear intensity is the default.
    """
    vals = np.sqrt(b.p) if use_sqrt else b.p.copy()
    pix = vals + vals.T
    np.fill_diagonal(pix, 0.0)
    return GrayImage(side=b.n, pixels=pix)


def resize_bilinear(img: GrayImage, target: int) -> GrayImage:
    """Resample to target x target with half-pixel-center mapping.

    Source coordinate per axis: s = (d + 0.5) * (S_src / S_dst) - 0.5,
    clamped to [0, S_src - 1]. Output values are convex combinations of
    the four surrounding input pixels, so they stay inside the input
    range.
    """
    if target < 1:
        raise ValueError(f"target side must be positive, got {target}")
    src = img.side
    if target == src:
        return GrayImage(side=src, pixels=img.pixels.copy())
    scale = src / target
    s = np.clip((np.arange(target) + 0.5) * scale - 0.5, 0.0, src - 1.0)
    lo = np.minimum(np.floor(s).astype(np.int64), src - 1)
    hi = np.minimum(lo + 1, src - 1)
    frac = s - lo
    p = img.pixels
    # direct 4-term form rather than two separable passes, to match the
    # per-pixel formula exactly
    wy0 = (1.0 - frac)[:, None]
    wy1 = frac[:, None]
    wx0 = (1.0 - frac)[None, :]
    wx1 = frac[None, :]
    out = (
        wy0 * wx0 * p[np.ix_(lo, lo)]
        + wy0 * wx1 * p[np.ix_(lo, hi)]
        + wy1 * wx0 * p[np.ix_(hi, lo)]
        + wy1 * wx1 * p[np.ix_(hi, hi)]
    )
    np.clip(out, 0.0, 1.0, out=out)
    return GrayImage(side=target, pixels=out)


def compose_pair(a: GrayImage, b: GrayImage) -> GrayImage:
    """One image from two: strict upper triangle from a, strict lower
    from b, zero diagonal."""
    if a.side != b.side:
        raise ValueError(f"side mismatch: {a.side} vs {b.side}")
    s = a.side
    out = np.zeros((s, s))
    upper = np.triu_indices(s, k=1)
    lower = np.tril_indices(s, k=-1)
    out[upper] = a.pixels[upper]
    out[lower] = b.pixels[lower]
    return GrayImage(side=s, pixels=out)


def quantize(pixels: np.ndarray) -> np.ndarray:
    """Map [0,1] intensities to uint8 with round-half-away-from-zero."""
    return np.floor(255.0 * pixels + 0.5).astype(np.uint8)


def write_pgm(img: GrayImage) -> bytes:
    """Serialize as binary PGM (P5), maxval 255, row-major payload."""
    header = f"P5\n{img.side} {img.side}\n255\n".encode("ascii")
    return header + quantize(img.pixels).tobytes()


def read_pgm(data: bytes) -> GrayImage:
    """Parse a binary PGM produced by write_pgm; intensity = byte / 255."""
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5":
        raise ValueError("not a binary PGM (P5) stream")
    try:
        w, h = (int(tok) for tok in parts[1].split())
    except ValueError:
        raise ValueError(f"bad dimension line {parts[1]!r}") from None
    if parts[2] != b"255":
        raise ValueError(f"unsupported maxval {parts[2]!r}")
    if w != h or w < 1:
        raise ValueError(f"expected a square image, got {w}x{h}")
    payload = parts[3]
    if len(payload) != w * h:
        raise ValueError(f"payload has {len(payload)} bytes, expected {w * h}")
    pix = np.frombuffer(payload, dtype=np.uint8).reshape(h, w) / 255.0
    return GrayImage(side=w, pixels=pix)
