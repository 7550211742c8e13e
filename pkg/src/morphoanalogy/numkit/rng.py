"""Seedable random source with named, independently reproducible streams."""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_key(label: str) -> int:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class Rng:
    """Deterministic PRNG: identical (seed, label, draw index) gives identical output.

    Streams derived with :meth:`stream` are statistically independent of the
    parent and of each other; labels compose into a path so the same label can
    be reused under different parents without collision.
    """

    def __init__(self, seed: int, label: str = "root"):
        self.seed = int(seed) & _MASK64
        self.label = label
        entropy = np.random.SeedSequence([self.seed, _label_key(label)])
        self.gen = np.random.Generator(np.random.PCG64(entropy))

    def stream(self, label: str) -> "Rng":
        """Derive an independent child stream named by ``label``."""
        return Rng(self.seed, f"{self.label}/{label}")

    # thin delegates for the draws the codebase actually uses
    def random(self, size=None, dtype=np.float64):
        return self.gen.random(size, dtype=dtype)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size=size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)

    def choice(self, a, size=None, replace=True):
        return self.gen.choice(a, size=size, replace=replace)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, label={self.label!r})"
