"""Inflection corpus parsing, analogy extraction, splits, and inventories.

The input format is UTF-8 TSV with three columns per line
(``source \\t features \\t target``, LF or CRLF). Word pairs sharing a
feature bundle license analogical quadruples; extraction enumerates each
unordered pair of pairs within a feature group exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

from .numkit import Rng

Word = str


class CorpusFormatError(ValueError):
    """Raised for malformed corpus input; the message names the line."""


class TransformationPair(NamedTuple):
    source: Word
    features: str
    target: Word


class Quadruple(NamedTuple):
    a: Word
    b: Word
    c: Word
    d: Word


class LabeledQuadruple(NamedTuple):
    quad: Quadruple
    label: int  # 1 = valid, 0 = invalid


# reserved character ids; PAD is 0 so index padding is a zero fill
PAD_ID = 0
BOW_ID = 1
EOW_ID = 2
UNK_ID = 3
N_RESERVED = 4


@dataclass(frozen=True)
class CharIndex:
    """Dense char -> id mapping with reserved PAD/BOW/EOW/UNK ids."""

    chars: tuple[str, ...]  # corpus characters, sorted by code point

    def __post_init__(self):
        object.__setattr__(self, "_ids", {c: i + N_RESERVED for i, c in enumerate(self.chars)})

    def __len__(self) -> int:
        return len(self.chars) + N_RESERVED

    def __contains__(self, ch: str) -> bool:
        return ch in self._ids

    def id_of(self, ch: str) -> int:
        """Id for one character; unseen characters map to UNK."""
        return self._ids.get(ch, UNK_ID)

    def to_json(self) -> dict:
        return {"chars": "".join(self.chars)}

    @classmethod
    def from_json(cls, data: dict) -> "CharIndex":
        return cls(tuple(data["chars"]))


@dataclass(frozen=True)
class Vocabulary:
    """Deduplicated word forms in a stable lexicographic order."""

    words: tuple[Word, ...]

    def __post_init__(self):
        object.__setattr__(self, "_index", {w: i for i, w in enumerate(self.words)})

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: Word) -> bool:
        return word in self._index

    def __iter__(self):
        return iter(self.words)

    def index(self, word: Word) -> int:
        return self._index[word]


def parse_inflection_file(data: bytes) -> list[TransformationPair]:
    """Parse TSV bytes into transformation pairs, one per nonempty line."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusFormatError(f"input is not valid UTF-8: {exc}") from exc

    pairs = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise CorpusFormatError(
                f"line {lineno}: expected 3 tab-separated fields, got {len(fields)}")
        source, features, target = fields
        if not source or not target:
            raise CorpusFormatError(f"line {lineno}: empty word")
        pairs.append(TransformationPair(source, features, target))
    return pairs


def format_pairs(pairs: Iterable[TransformationPair]) -> bytes:
    """Inverse of parse_inflection_file (modulo a trailing newline)."""
    lines = [f"{p.source}\t{p.features}\t{p.target}" for p in pairs]
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


def extract_analogies(pairs: Sequence[TransformationPair],
                      cap: Optional[int] = None,
                      seed: int = 0) -> list[Quadruple]:
    """Enumerate quadruples a:b::c:d from pairs sharing a feature bundle.

    Within each feature group, members are kept in file order and unordered
    pairs (i, j) with i <= j each yield exactly one quadruple, so reversed
    duplicates are never emitted and every pair also yields its reflexive
    a:b::a:b form. If the total exceeds ``cap``, a uniform subsample of size
    ``cap`` is drawn with ``seed`` (original order preserved); ``cap=None``
    disables capping.
    """
    if cap is not None and cap < 0:
        raise ValueError(f"cap must be >= 0, got {cap}")

    groups: dict[str, list[TransformationPair]] = {}
    for pair in pairs:
        groups.setdefault(pair.features, []).append(pair)

    quads: list[Quadruple] = []
    for members in groups.values():
        for i, first in enumerate(members):
            for second in members[i:]:
                quads.append(Quadruple(first.source, first.target,
                                       second.source, second.target))

    if cap is not None and len(quads) > cap:
        rng = Rng(seed).stream("extract-cap")
        keep = rng.choice(len(quads), size=cap, replace=False)
        keep.sort()
        quads = [quads[i] for i in keep]
    return quads


def subsample_quadruples(quads: Sequence[Quadruple], cap: Optional[int],
                         seed: int = 0, label: str = "load-cap") -> list[Quadruple]:
    """Uniform subsample to ``cap`` items (order preserved); None disables."""
    if cap is None or len(quads) <= cap:
        return list(quads)
    if cap < 0:
        raise ValueError(f"cap must be >= 0, got {cap}")
    rng = Rng(seed).stream(label)
    keep = rng.choice(len(quads), size=cap, replace=False)
    keep.sort()
    return [quads[i] for i in keep]


def random_split(quadruples: Sequence[Quadruple], ratio: float,
                 seed: int = 0) -> tuple[list[Quadruple], list[Quadruple]]:
    """Deterministic shuffle-split: first floor(ratio*N) items go to train."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    order = Rng(seed).stream("split").permutation(len(quadruples))
    n_train = int(ratio * len(quadruples))
    train = [quadruples[i] for i in order[:n_train]]
    test = [quadruples[i] for i in order[n_train:]]
    return train, test


def build_charset(words: Iterable[Word]) -> CharIndex:
    """Character inventory of ``words`` plus the reserved ids."""
    seen = set()
    for word in words:
        seen.update(word)
    return CharIndex(tuple(sorted(seen)))


def build_vocabulary(train: Iterable[Quadruple], test: Iterable[Quadruple]) -> Vocabulary:
    """Deduplicated union of all word forms appearing in either split."""
    seen = set()
    for quad in train:
        seen.update(quad)
    for quad in test:
        seen.update(quad)
    return Vocabulary(tuple(sorted(seen)))


def quadruple_words(quads: Iterable[Quadruple]) -> list[Word]:
    """All word forms (with duplicates) across the given quadruples."""
    out = []
    for q in quads:
        out.extend(q)
    return out


def write_quadruples(quads: Iterable[Quadruple], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for q in quads:
            fh.write(f"{q.a}\t{q.b}\t{q.c}\t{q.d}\n")


def read_quadruples(path) -> list[Quadruple]:
    quads = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise CorpusFormatError(
                    f"line {lineno}: expected 4 tab-separated fields, got {len(fields)}")
            quads.append(Quadruple(*fields))
    return quads
