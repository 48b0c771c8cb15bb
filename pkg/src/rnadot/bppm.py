"""Base-pairing probability matrices under a simplified pair-energy model.

The ensemble is every pseudoknot-free set of pairs over {AU, GC, GU}
(order-insensitive) whose spans each enclose at least ``min_hairpin``
unpaired positions. Each structure carries the Boltzmann weight
prod(exp(-E(a,b)/rt)) over its pairs; the empty structure has weight 1.
Inside/outside dynamic programming in log domain gives exact pair
probabilities; an exhaustive-enumeration oracle covers small n.

Full nearest-neighbor thermodynamics (stacking, loop terms) is out of
scope; externally computed matrices can be imported via the text format
in :func:`read_bppm` / :func:`write_bppm`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .seqio import RnaSequence

NEG_INF = float("-inf")

DEFAULT_E_AU = -2.0
DEFAULT_E_GC = -3.0
DEFAULT_E_GU = -1.0
DEFAULT_RT = 0.6163  # kcal/mol at 310.15 K
DEFAULT_MIN_HAIRPIN = 3

#: auto prune policy: exact below this length, pruned above
AUTO_PRUNE_EXACT_MAX_N = 64
AUTO_PRUNE_THRESHOLD = 1e-6

_CODE = {"A": 0, "C": 1, "G": 2, "U": 3}


@dataclass(frozen=True)
class EnergyModel:
    """Per-pair energies (kcal/mol), thermal energy, and hairpin bound."""

    e_au: float = DEFAULT_E_AU
    e_gc: float = DEFAULT_E_GC
    e_gu: float = DEFAULT_E_GU
    rt: float = DEFAULT_RT
    min_hairpin: int = DEFAULT_MIN_HAIRPIN

    def __post_init__(self):
        if not (self.rt > 0):
            raise ValueError(f"rt must be positive, got {self.rt}")
        if self.min_hairpin < 0:
            raise ValueError(f"min_hairpin must be >= 0, got {self.min_hairpin}")
        for name in ("e_au", "e_gc", "e_gu"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def log_pair_weight(self, a: str, b: str) -> float:
        """log Boltzmann weight of pairing a with b; -inf if forbidden."""
        pair = frozenset((a, b))
        if pair == frozenset("AU"):
            e = self.e_au
        elif pair == frozenset("GC"):
            e = self.e_gc
        elif pair == frozenset("GU"):
            e = self.e_gu
        else:
            return NEG_INF
        return -e / self.rt

    def fingerprint(self) -> str:
        """Stable text key identifying the model (used in manifests)."""
        return (
            f"pair-energy;e_au={self.e_au!r};e_gc={self.e_gc!r};"
            f"e_gu={self.e_gu!r};rt={self.rt!r};h={self.min_hairpin}"
        )


def pair_weight(model: EnergyModel, a: str, b: str) -> float:
    """Boltzmann weight exp(-E(a,b)/rt); 0 for a forbidden combination."""
    lw = model.log_pair_weight(a, b)
    return 0.0 if lw == NEG_INF else math.exp(lw)


@dataclass
class Bppm:
    """Pair probabilities P(i,j) for i<j, stored as a dense (n, n) array.

    Only the strict upper triangle is meaningful (0-based storage for
    1-based positions: P(i,j) lives at ``p[i-1, j-1]``).
    """

    n: int
    p: np.ndarray

    def __post_init__(self):
        if self.p.shape != (self.n, self.n):
            raise ValueError(f"matrix shape {self.p.shape} does not match n={self.n}")

    def validate(self, tol: float = 1e-9) -> None:
        """Check range and the one-partner-per-base row-sum bound."""
        if np.any(self.p < 0) or np.any(self.p > 1):
            raise ValueError("probabilities outside [0, 1]")
        if np.any(np.tril(np.ones_like(self.p, dtype=bool)) & (self.p != 0)):
            raise ValueError("entries outside the strict upper triangle")
        sums = row_sums(self)
        if np.any(sums > 1 + tol):
            raise ValueError(f"row-sum bound violated: max {sums.max()}")


def row_sums(b: Bppm) -> np.ndarray:
    """Total pairing probability per position (both triangle directions)."""
    return b.p.sum(axis=0) + b.p.sum(axis=1)


def default_prune(n: int) -> float:
    return 0.0 if n <= AUTO_PRUNE_EXACT_MAX_N else AUTO_PRUNE_THRESHOLD


def _log_weight_matrix(seq: RnaSequence, model: EnergyModel) -> np.ndarray:
    """(n+2, n+2) padded 1-based matrix of log pair weights.

    Entries are -inf where the residue combination is forbidden or the
    span is below min_hairpin + 1.
    """
    n = seq.length
    h = model.min_hairpin
    lw = np.array(
        [
            [model.log_pair_weight(a, b) for b in "ACGU"]
            for a in "ACGU"
        ]
    )
    codes = np.array([_CODE[c] for c in seq.residues], dtype=np.int64)
    logw = np.full((n + 2, n + 2), NEG_INF)
    logw[1 : n + 1, 1 : n + 1] = lw[codes[:, None], codes[None, :]]
    spans_ok = np.add.outer(-np.arange(n + 2), np.arange(n + 2)) >= h + 1
    logw[~spans_ok] = NEG_INF
    return logw


def inside(seq: RnaSequence, model: EnergyModel) -> np.ndarray:
    """Inside table logQ, (n+2, n+2), 1-based with empty-interval padding.

    logQ[i, j] is the log Boltzmann sum over all pseudoknot-free
    structures of the substring [i..j]; logQ[1, n] covers the whole
    sequence. Entries with j < i are log(1) = 0.
    """
    logw = _log_weight_matrix(seq, model)
    return kernels.inside_log(logw, model.min_hairpin)


def outside_pair_probs(
    seq: RnaSequence,
    model: EnergyModel,
    logq: np.ndarray,
    prune_threshold: float = 0.0,
) -> Bppm:
    """Pair probabilities from an inside table via the outside recursion.

    ``prune_threshold`` skips enclosing-pair terms whose probability is
    below the threshold; 0 gives the exact result.
    """
    if prune_threshold < 0:
        raise ValueError("prune_threshold must be non-negative")
    n = seq.length
    if logq.shape != (n + 2, n + 2):
        raise ValueError("inside table does not match sequence length")
    logw = _log_weight_matrix(seq, model)
    logp = kernels.outside_log(logq, logw, model.min_hairpin, prune_threshold)
    p = np.exp(logp[1 : n + 1, 1 : n + 1])
    p[np.isnan(p)] = 0.0
    np.clip(p, 0.0, 1.0, out=p)
    p[np.tril_indices(n)] = 0.0
    return Bppm(n=n, p=p)


def compute_bppm(
    seq: RnaSequence,
    model: EnergyModel | None = None,
    prune_threshold: float | None = None,
) -> Bppm:
    """Inside + outside in one call.

    ``prune_threshold=None`` selects the auto policy (exact up to
    n=64, 1e-6 above).
    """
    model = model or EnergyModel()
    if prune_threshold is None:
        prune_threshold = default_prune(seq.length)
    logq = inside(seq, model)
    return outside_pair_probs(seq, model, logq, prune_threshold)


# ---------------------------------------------------------------------------
# Exhaustive-enumeration oracle (independent of the DP path)

ENUMERATION_MAX_N = 22


def enumerate_structures(
    seq: RnaSequence, model: EnergyModel
) -> list[tuple[frozenset[tuple[int, int]], float]]:
    """All pseudoknot-free structures with their Boltzmann weights.

    Pairs are 1-based (i, j) tuples with i < j. Includes the empty
    structure with weight 1. Guarded to n <= 22; the count grows
    exponentially.
    """
    n = seq.length
    if n > ENUMERATION_MAX_N:
        raise ValueError(f"enumeration limited to n <= {ENUMERATION_MAX_N}, got {n}")
    h = model.min_hairpin
    res = seq.residues

    def recurse(i: int, j: int) -> list[frozenset]:
        # structures of [i..j]; conditioning on i's pairing partner makes
        # each structure appear exactly once
        if j - i < 0:
            return [frozenset()]
        out = list(recurse(i + 1, j))
        for k in range(i + h + 1, j + 1):
            if model.log_pair_weight(res[i - 1], res[k - 1]) == NEG_INF:
                continue
            for left in recurse(i + 1, k - 1):
                for right in recurse(k + 1, j):
                    out.append(left | right | {(i, k)})
        return out

    structures = recurse(1, n)
    out = []
    for s in structures:
        weight = 1.0
        for (i, j) in s:
            weight *= pair_weight(model, res[i - 1], res[j - 1])
        out.append((s, weight))
    return out


def oracle_bppm(seq: RnaSequence, model: EnergyModel | None = None) -> Bppm:
    """Pair probabilities by brute-force enumeration (n <= 22)."""
    model = model or EnergyModel()
    structures = enumerate_structures(seq, model)
    total = sum(weight for _, weight in structures)
    n = seq.length
    p = np.zeros((n, n))
    for pairs, weight in structures:
        for (i, j) in pairs:
            p[i - 1, j - 1] += weight
    p /= total
    b = Bppm(n=n, p=p)
    b.validate()
    return b


# ---------------------------------------------------------------------------
# Text serialization (also the import format for external matrices)

def write_bppm(b: Bppm) -> str:
    """Serialize to the text format: header line, then nonzero entries.

    Format: ``BPPM <n>`` then one ``i j p`` line per nonzero entry,
    1-based, sorted by (i, j), probabilities at 17 significant digits
    (bit-exact float64 round-trip).
    """
    lines = [f"BPPM {b.n}"]
    ii, jj = np.nonzero(b.p)
    for i, j in zip(ii, jj):
        lines.append(f"{i + 1} {j + 1} {b.p[i, j]:.17g}")
    return "\n".join(lines) + "\n"


def read_bppm(text: str) -> Bppm:
    """Parse the text format back into a matrix; inverse of write_bppm."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("BPPM "):
        raise ValueError('missing "BPPM <n>" header')
    try:
        n = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise ValueError(f"bad header {lines[0]!r}") from None
    if n < 1:
        raise ValueError(f"bad matrix size {n}")
    p = np.zeros((n, n))
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"bad entry line {ln!r}")
        i, j = int(parts[0]), int(parts[1])
        prob = float(parts[2])
        if not (1 <= i < j <= n):
            raise ValueError(f"entry ({i}, {j}) outside the strict upper triangle")
        if not (0.0 <= prob <= 1.0):
            raise ValueError(f"probability {prob} outside [0, 1] at ({i}, {j})")
        p[i - 1, j - 1] = prob
    return Bppm(n=n, p=p)
