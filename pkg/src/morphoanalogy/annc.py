"""Analogy classifier head: paired-row convolutions over stacked embeddings.

The four word embeddings are stacked into a 4 x n matrix. The first
convolution pairs rows (a, b) and (c, d) without overlap, measuring how each
half differs per embedding component; the second compares the two difference
rows two components at a time; a dense layer plus sigmoid squashes the
result to a validity score in (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .numkit import (
    Parameter,
    Rng,
    conv2d,
    conv2d_backward,
    fully_connected,
    fully_connected_backward,
    relu,
    relu_backward,
    sigmoid,
    sigmoid_backward,
    uniform_fanin,
)

CONV1_FILTERS = 128
CONV2_FILTERS = 64


@dataclass
class AnncParams:
    conv1_w: Parameter   # (128, 1, 2, 1), stride (2, 1)
    conv1_b: Parameter
    conv2_w: Parameter   # (64, 128, 2, 2), stride (2, 2)
    conv2_b: Parameter
    dense_w: Parameter   # (64 * n/2, 1)
    dense_b: Parameter

    def parameters(self) -> list[Parameter]:
        return [self.conv1_w, self.conv1_b, self.conv2_w, self.conv2_b,
                self.dense_w, self.dense_b]


def init_annc(n: int, rng: Rng,
              conv1_filters: int = CONV1_FILTERS,
              conv2_filters: int = CONV2_FILTERS) -> AnncParams:
    if n % 2 != 0:
        raise ValueError(f"embedding dimension must be even, got {n}")
    c1 = uniform_fanin(rng.stream("conv1"), (conv1_filters, 1, 2, 1), fan_in=2)
    c2 = uniform_fanin(rng.stream("conv2"), (conv2_filters, conv1_filters, 2, 2),
                       fan_in=conv1_filters * 4)
    dense_in = conv2_filters * (n // 2)
    dw = uniform_fanin(rng.stream("dense"), (dense_in, 1), fan_in=dense_in)
    return AnncParams(
        Parameter("annc.conv1.weight", c1),
        Parameter("annc.conv1.bias", np.zeros(conv1_filters, dtype=np.float32)),
        Parameter("annc.conv2.weight", c2),
        Parameter("annc.conv2.bias", np.zeros(conv2_filters, dtype=np.float32)),
        Parameter("annc.dense.weight", dw),
        Parameter("annc.dense.bias", np.zeros(1, dtype=np.float32)),
    )


class AnncCtx(NamedTuple):
    conv1_ctx: object
    relu1_mask: np.ndarray
    conv2_ctx: object
    relu2_mask: np.ndarray
    fc_ctx: object
    sig_out: np.ndarray
    h2_shape: tuple


def annc_forward(params: AnncParams, stacked: np.ndarray):
    """Scores in (0, 1) for a batch of stacked quadruple embeddings (B, 4, n)."""
    x = stacked[:, None, :, :]                      # (B, 1, 4, n)
    y1, conv1_ctx = conv2d(x, params.conv1_w.value, params.conv1_b.value, stride=(2, 1))
    h1, mask1 = relu(y1)                            # (B, 128, 2, n)
    y2, conv2_ctx = conv2d(h1, params.conv2_w.value, params.conv2_b.value, stride=(2, 2))
    h2, mask2 = relu(y2)                            # (B, 64, 1, n/2)
    flat = h2.reshape(h2.shape[0], -1)
    logits, fc_ctx = fully_connected(flat, params.dense_w.value, params.dense_b.value)
    scores, sig_out = sigmoid(logits[:, 0])
    ctx = AnncCtx(conv1_ctx, mask1, conv2_ctx, mask2, fc_ctx, sig_out, h2.shape)
    return scores, ctx


def annc_backward(params: AnncParams, ctx: AnncCtx, dscores: np.ndarray) -> np.ndarray:
    """Accumulate parameter gradients; returns gradient w.r.t. the (B, 4, n) stack."""
    dlogits = sigmoid_backward(ctx.sig_out, dscores)[:, None]
    dflat, dw, db = fully_connected_backward(ctx.fc_ctx, dlogits)
    params.dense_w.grad += dw
    params.dense_b.grad += db
    dh2 = dflat.reshape(ctx.h2_shape)
    dy2 = relu_backward(ctx.relu2_mask, dh2)
    dh1, dw2, db2 = conv2d_backward(ctx.conv2_ctx, dy2)
    params.conv2_w.grad += dw2
    params.conv2_b.grad += db2
    dy1 = relu_backward(ctx.relu1_mask, dh1)
    dx, dw1, db1 = conv2d_backward(ctx.conv1_ctx, dy1)
    params.conv1_w.grad += dw1
    params.conv1_b.grad += db1
    return dx[:, 0, :, :]


def classify(embedder_params, annc_params: AnncParams, quad, charset) -> float:
    """Score one quadruple; convenience wrapper over the batched forward."""
    from .embedder import embed_batch

    emb, _ = embed_batch(embedder_params, list(quad), charset)
    scores, _ = annc_forward(annc_params, emb[None, :, :])
    return float(scores[0])


def decide(score: float, threshold: float = 0.5) -> bool:
    """True (valid) iff score >= threshold; the boundary counts as valid."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    return score >= threshold
