"""Deterministic random-number streams derived from one root seed.

Every source of randomness in a run is a named substream of the run's
64-bit seed.  A substream is identified by a purpose label; its state is
seeded from ``SeedSequence([seed, blake2b(label)])``, so adding an agent
(a new label) never perturbs the draws of existing streams.  The state
sequence of a run always comes from the ``"states"`` substream; agent i
draws, when it needs any, from ``"agent:i"``.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def label_key(label: str) -> int:
    """Stable 64-bit key for a substream label."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def substream(seed: int, label: str) -> np.random.Generator:
    """Generator for the named substream of ``seed``."""
    entropy = [int(seed) & _MASK64, label_key(label)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def run_seed(base_seed: int, index: int) -> int:
    """Seed of the ``index``-th run of a multi-seed experiment."""
    return (int(base_seed) + int(index)) & _MASK64
