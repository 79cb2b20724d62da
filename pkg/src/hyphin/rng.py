"""Seeded sub-stream derivation.

All randomness in a run flows from one root seed. Consumers request a
named sub-stream (``init``, ``dropout``, ``augment``, ``split``, ``probe``,
...) so that adding a new consumer never perturbs the draws of an existing
one. Names are hashed with SHA-256, which is stable across platforms and
Python versions (unlike ``hash()``).
"""

import hashlib

import numpy as np


def _token(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(root_seed: int, *parts) -> np.random.Generator:
    """Return a Generator for the sub-stream named by ``parts``.

    The same (root_seed, parts) always yields the same stream; distinct
    names yield independent streams.
    """
    entropy = [_token(root_seed)] + [_token(p) for p in parts]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def coerce_rng(seed_or_rng) -> np.random.Generator:
    """Accept either an integer seed or an existing Generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(int(seed_or_rng))
