"""Deterministic RNG derivation.

Workers get independent streams keyed by (global seed, tokens such as
sample ids or pair indices), so per-sample results do not depend on
scheduling order.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _token_to_int(token) -> int:
    if isinstance(token, (int, np.integer)):
        return int(token) & _MASK64
    digest = hashlib.sha256(str(token).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(seed: int, *tokens) -> np.random.Generator:
    """A PCG64 generator seeded from ``seed`` and any hashable tokens."""
    entropy = [int(seed) & _MASK64] + [_token_to_int(t) for t in tokens]
    return np.random.default_rng(np.random.SeedSequence(entropy))
