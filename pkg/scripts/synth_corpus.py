#!/usr/bin/env python3
"""Generate a synthetic affix-morphology corpus in the 3-column TSV format.

Useful for exercising the whole pipeline when no inflection corpus is at
hand: stems are CV syllable words, each transformed by a handful of regular
prefix/suffix rules; pairs sharing a rule license analogies exactly like
real inflection data.
"""

import argparse
import sys

import numpy as np

CONSONANTS = "bdfgklmnprst"
VOWELS = "aeiou"

RULES = {
    "case=pl": lambda s: s + "at",
    "case=gen": lambda s: s + "im",
    "case=loc": lambda s: s + "esse",
    "tense=past": lambda s: s + "ur",
    "dim": lambda s: "mi" + s,
}


def make_stems(n, seed):
    rng = np.random.default_rng(seed)
    stems, seen = [], set()
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


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--stems", type=int, default=300)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)

    stems = make_stems(args.stems, args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        for feats, rule in RULES.items():
            for stem in stems:
                fh.write(f"{stem}\t{feats}\t{rule(stem)}\n")
    print(f"wrote {len(stems) * len(RULES)} pairs to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
