"""Seeded, splittable random streams keyed by (seed, step, purpose)."""

from __future__ import annotations

import zlib

import numpy as np


def purpose_key(purpose: str) -> int:
    """Stable 32-bit key for a purpose tag."""
    return zlib.crc32(purpose.encode("utf-8"))


def rng_stream(seed: int, step: int, purpose: str) -> np.random.Generator:
    """
    Generator for one (seed, step, purpose) triple.

    Streams with different keys are statistically independent, and the
    same key always reproduces the same draws.
    """
    sequence = np.random.SeedSequence([int(seed), int(step), purpose_key(purpose)])
    return np.random.default_rng(sequence)
