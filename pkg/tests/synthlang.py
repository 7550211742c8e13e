"""Procedural miniature languages used to exercise the full pipeline.

copy_language produces identity pairs (x -> x), whose analogies x:x::y:y are
trivially separable. suffix_language applies regular affix rules to CV-stems,
giving real (if toy) morphology that the embedder and heads can learn.
"""

from __future__ import annotations

import numpy as np

from morphoanalogy.corpus import TransformationPair

CONSONANTS = "bdfgklmnprst"
VOWELS = "aeiou"


def make_stems(n: int, seed: int = 0) -> list[str]:
    rng = np.random.default_rng(seed)
    stems = []
    seen = set()
    while len(stems) < n:
        syllables = rng.integers(1, 3) + 1
        word = "".join(CONSONANTS[rng.integers(len(CONSONANTS))]
                       + VOWELS[rng.integers(len(VOWELS))]
                       for _ in range(syllables))
        if rng.random() < 0.5:
            word += CONSONANTS[rng.integers(len(CONSONANTS))]
        if word not in seen:
            seen.add(word)
            stems.append(word)
    return stems


def copy_language(n_words: int = 50, seed: int = 0) -> list[TransformationPair]:
    """Identity transformations: extraction yields analogies x:x::y:y."""
    return [TransformationPair(w, "ident", w) for w in make_stems(n_words, seed)]


SUFFIX_RULES = {
    "case=pl": lambda s: s + "at",
    "case=gen": lambda s: s + "im",
    "case=loc": lambda s: s + "esse",
    "tense=past": lambda s: s + "ur",
    "dim": lambda s: "mi" + s,
}


def suffix_language(n_stems: int = 100, seed: int = 0,
                    rules: dict | None = None) -> list[TransformationPair]:
    """Affix morphology: one pair per (stem, rule), grouped by rule name."""
    rules = rules if rules is not None else SUFFIX_RULES
    stems = make_stems(n_stems, seed)
    return [TransformationPair(stem, feats, rule(stem))
            for feats, rule in rules.items() for stem in stems]
