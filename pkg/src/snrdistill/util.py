"""Small shared helpers: seeded RNG streams and CSV formatting."""

from __future__ import annotations

import zlib

import numpy as np


def child_rng(root_seed: int, *tags: int | str) -> np.random.Generator:
    """Derive an independent generator from a root seed and a tag path.

    Tags keep the streams of unrelated stages (init, batches, evaluation
    noise, ...) decoupled: changing how often one stage draws never shifts
    another stage's stream. Strings are hashed with crc32, which is stable
    across platforms and Python versions.
    """
    entropy = [int(root_seed) & 0xFFFFFFFF]
    for tag in tags:
        if isinstance(tag, str):
            entropy.append(zlib.crc32(tag.encode("utf-8")))
        else:
            entropy.append(int(tag) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def fmt_float(x: float) -> str:
    """Shortest decimal string that round-trips the float64 exactly."""
    return repr(float(x))
