"""Morphological word embedder: char embeddings, multi-width CNNs, max pooling.

A word is bracketed with BOW/EOW marks, right-padded with PAD (an all-zero,
never-updated embedding row) to length max(len+2, max filter width), and
embedded per character. Filters of widths 2..6 (16 each by default) slide
along the character axis spanning the full character-embedding width; the
per-filter maximum over positions is one component of the word vector, so
the default output has 5 * 16 = 80 dimensions, ordered by ascending width
then filter index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .corpus import BOW_ID, EOW_ID, PAD_ID, CharIndex
from .numkit import (
    Parameter,
    Rng,
    conv2d,
    conv2d_backward,
    embedding_lookup,
    embedding_lookup_backward,
    max_over_positions,
    max_over_positions_backward,
    uniform_fanin,
)

DEFAULT_WIDTHS = (2, 3, 4, 5, 6)
DEFAULT_FILTERS_PER_WIDTH = 16
CHAR_INIT_BOUND = 0.05


@dataclass
class EmbedderParams:
    """Character matrix plus one filter bank per width."""

    char_matrix: Parameter               # (|charset|, m)
    conv_weights: dict[int, Parameter]   # width -> (filters, 1, width, m)
    conv_biases: dict[int, Parameter]    # width -> (filters,)

    @property
    def char_dim(self) -> int:
        return self.char_matrix.shape[1]

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(self.conv_weights)

    @property
    def out_dim(self) -> int:
        return sum(w.shape[0] for w in self.conv_weights.values())

    def parameters(self) -> list[Parameter]:
        out = [self.char_matrix]
        for width in self.widths:
            out.append(self.conv_weights[width])
            out.append(self.conv_biases[width])
        return out


def init_embedder(charset: CharIndex, m: int, rng: Rng,
                  widths: Sequence[int] = DEFAULT_WIDTHS,
                  filters_per_width: int = DEFAULT_FILTERS_PER_WIDTH) -> EmbedderParams:
    """Fresh embedder parameters; the PAD row is pinned to zeros."""
    if m <= 0:
        raise ValueError(f"char embedding size must be positive, got {m}")
    char_rng = rng.stream("char-matrix")
    chars = char_rng.uniform(-CHAR_INIT_BOUND, CHAR_INIT_BOUND,
                             size=(len(charset), m)).astype(np.float32)
    chars[PAD_ID] = 0.0
    params = EmbedderParams(Parameter("embedder.char_matrix", chars), {}, {})
    for width in widths:
        w_rng = rng.stream(f"conv-w{width}")
        weight = uniform_fanin(w_rng, (filters_per_width, 1, width, m), fan_in=width * m)
        params.conv_weights[width] = Parameter(f"embedder.conv_w{width}.weight", weight)
        params.conv_biases[width] = Parameter(
            f"embedder.conv_w{width}.bias", np.zeros(filters_per_width, dtype=np.float32))
    return params


def encode_word(word: str, charset: CharIndex, min_length: int = 6) -> list[int]:
    """Char ids for BOW + word + EOW, right-padded with PAD to min_length."""
    if not word:
        raise ValueError("cannot embed an empty word")
    ids = [BOW_ID] + [charset.id_of(ch) for ch in word] + [EOW_ID]
    if len(ids) < min_length:
        ids.extend([PAD_ID] * (min_length - len(ids)))
    return ids


class EmbedCtx(NamedTuple):
    lookup_ctx: object
    per_width: list          # (width, conv_ctx, max_ctx) in ascending width order
    x_shape: tuple
    n_unknown: int


def embed_batch(params: EmbedderParams, words: Sequence[str], charset: CharIndex):
    """Embed words as a (len(words), out_dim) float32 matrix, plus backward ctx."""
    widths = params.widths
    min_len = max(widths)
    encoded = [encode_word(w, charset, min_len) for w in words]
    lengths = np.array([len(ids) for ids in encoded])
    max_len = int(lengths.max())

    ids = np.zeros((len(words), max_len), dtype=np.int64)  # PAD_ID == 0
    for row, enc in zip(ids, encoded):
        row[:len(enc)] = enc
    n_unknown = sum(1 for w in words for ch in w if ch not in charset)

    x, lookup_ctx = embedding_lookup(params.char_matrix.value, ids)
    x4 = x[:, None, :, :]  # (B, 1, L, m)

    outputs = []
    per_width = []
    positions = np.arange(max_len)
    for width in widths:
        w = params.conv_weights[width]
        b = params.conv_biases[width]
        y, conv_ctx = conv2d(x4, w.value, b.value, stride=(1, 1))
        y3 = y[:, :, :, 0]  # (B, F, P)
        n_pos = y3.shape[2]
        valid = positions[None, :n_pos] < (lengths[:, None] - width + 1)
        pooled, max_ctx = max_over_positions(y3, valid=valid)
        outputs.append(pooled)
        per_width.append((width, conv_ctx, max_ctx))

    out = np.concatenate(outputs, axis=1)
    return out, EmbedCtx(lookup_ctx, per_width, x4.shape, n_unknown)


def embed_batch_backward(params: EmbedderParams, ctx: EmbedCtx, dout: np.ndarray) -> None:
    """Accumulate gradients for one embed_batch call into the parameters.

    The PAD row of the character matrix never receives gradient.
    """
    dx4 = np.zeros(ctx.x_shape, dtype=dout.dtype)
    offset = 0
    for width, conv_ctx, max_ctx in ctx.per_width:
        n_filters = params.conv_weights[width].shape[0]
        d_pooled = dout[:, offset:offset + n_filters]
        offset += n_filters
        dy3 = max_over_positions_backward(max_ctx, d_pooled)
        dxi, dw, db = conv2d_backward(conv_ctx, dy3[:, :, :, None])
        params.conv_weights[width].grad += dw
        params.conv_biases[width].grad += db
        dx4 += dxi
    dtable = embedding_lookup_backward(ctx.lookup_ctx, dx4[:, 0, :, :])
    dtable[PAD_ID] = 0.0
    params.char_matrix.grad += dtable


def embed_word(params: EmbedderParams, word: str, charset: CharIndex) -> np.ndarray:
    """Embedding vector for a single word (pure, batch-independent)."""
    out, _ = embed_batch(params, [word], charset)
    return out[0]
