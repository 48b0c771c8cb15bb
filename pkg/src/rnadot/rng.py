"""Deterministic random-stream derivation.

All randomness in the package flows from a single 64-bit run seed.
Independent sub-streams are derived by hashing (seed, purpose-tag,
indices), so adding a consumer never shifts the draws of another.
Reproducibility is guaranteed within this implementation only.
"""

import hashlib

import numpy as np


def substream(seed: int, *tags) -> np.random.Generator:
    """Return a generator keyed by ``(seed, *tags)``.

    Tags may be strings or integers; the tuple is hashed to a 128-bit
    entropy value, so distinct tag tuples give independent streams.
    """
    payload = repr((int(seed),) + tuple(tags)).encode("utf-8")
    digest = hashlib.blake2b(payload, digest_size=16).digest()
    entropy = int.from_bytes(digest, "little")
    return np.random.default_rng(np.random.SeedSequence(entropy))
