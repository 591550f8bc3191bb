"""Deterministic random streams.

All randomness in the package flows through `stream`: a generator derived
from a master seed plus a path of labels. Identical (seed, path) pairs
reproduce the identical stream, distinct paths give statistically
independent streams, and nothing ever reads ambient entropy.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_entropy(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK64
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, *path) -> np.random.Generator:
    """Return the generator for a master seed and a derivation path.

    Path components may be ints or strings; strings are hashed to stable
    64-bit integers so the mapping never depends on interpreter state.
    """
    entropy = [int(seed) & _MASK64] + [_label_entropy(p) for p in path]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def haar_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """One n-by-n unitary drawn from the unitary group's invariant measure.

    Ginibre matrix, QR factorization, then the R-diagonal phase fix that
    makes the distribution exactly invariant.
    """
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(g / np.sqrt(2.0))
    d = np.diagonal(r)
    return q * (d / np.abs(d))
