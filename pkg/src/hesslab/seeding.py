"""Deterministic RNG derivation.

All randomness in the package flows from a single integer seed. Independent
tasks (probes, trials, blocks, ...) get their own generator derived from the
seed plus a task label, so results do not depend on execution order or on how
work is split across workers.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_words(label: str) -> list[int]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def derive_rng(seed: int, *path) -> np.random.Generator:
    """Generator for the task identified by ``path`` under the given seed.

    Path elements may be integers (trial/probe indices) or short strings
    (task labels, hashed into the seed sequence).
    """
    entropy: list[int] = [int(seed)]
    for item in path:
        if isinstance(item, str):
            entropy.extend(_label_words(item))
        else:
            entropy.append(int(item))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
