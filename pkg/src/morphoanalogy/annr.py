"""Analogy regression head: predicts the fourth embedding from the first three.

Two ReLU dense encoders read the concatenations (a, b) and (a, c); a final
linear combiner maps their outputs to the predicted embedding of d. Hidden
width equals the embedding dimension.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .numkit import (
    Parameter,
    Rng,
    fully_connected,
    fully_connected_backward,
    relu,
    relu_backward,
    uniform_fanin,
)


@dataclass
class AnnrParams:
    enc_ab_w: Parameter   # (2n, n)
    enc_ab_b: Parameter
    enc_ac_w: Parameter   # (2n, n)
    enc_ac_b: Parameter
    comb_w: Parameter     # (2n, n)
    comb_b: Parameter

    def parameters(self) -> list[Parameter]:
        return [self.enc_ab_w, self.enc_ab_b, self.enc_ac_w, self.enc_ac_b,
                self.comb_w, self.comb_b]


def init_annr(n: int, rng: Rng) -> AnnrParams:
    def dense(label, name):
        w = uniform_fanin(rng.stream(label), (2 * n, n), fan_in=2 * n)
        return (Parameter(f"annr.{name}.weight", w),
                Parameter(f"annr.{name}.bias", np.zeros(n, dtype=np.float32)))

    ab_w, ab_b = dense("enc-ab", "enc_ab")
    ac_w, ac_b = dense("enc-ac", "enc_ac")
    comb_w, comb_b = dense("combiner", "combiner")
    return AnnrParams(ab_w, ab_b, ac_w, ac_b, comb_w, comb_b)


class AnnrCtx(NamedTuple):
    fc_ab_ctx: object
    mask_ab: np.ndarray
    fc_ac_ctx: object
    mask_ac: np.ndarray
    fc_comb_ctx: object
    n: int


def annr_forward(params: AnnrParams, ea: np.ndarray, eb: np.ndarray, ec: np.ndarray):
    """Predicted embedding of d for a batch of (B, n) input embeddings."""
    n = ea.shape[1]
    y_ab, fc_ab_ctx = fully_connected(np.concatenate([ea, eb], axis=1),
                                      params.enc_ab_w.value, params.enc_ab_b.value)
    h_ab, mask_ab = relu(y_ab)
    y_ac, fc_ac_ctx = fully_connected(np.concatenate([ea, ec], axis=1),
                                      params.enc_ac_w.value, params.enc_ac_b.value)
    h_ac, mask_ac = relu(y_ac)
    out, fc_comb_ctx = fully_connected(np.concatenate([h_ab, h_ac], axis=1),
                                       params.comb_w.value, params.comb_b.value)
    return out, AnnrCtx(fc_ab_ctx, mask_ab, fc_ac_ctx, mask_ac, fc_comb_ctx, n)


def annr_backward(params: AnnrParams, ctx: AnnrCtx, dout: np.ndarray):
    """Accumulate parameter gradients; returns (d_ea, d_eb, d_ec)."""
    n = ctx.n
    dh, dw, db = fully_connected_backward(ctx.fc_comb_ctx, dout)
    params.comb_w.grad += dw
    params.comb_b.grad += db
    dy_ab = relu_backward(ctx.mask_ab, dh[:, :n])
    dy_ac = relu_backward(ctx.mask_ac, dh[:, n:])
    dcat_ab, dw_ab, db_ab = fully_connected_backward(ctx.fc_ab_ctx, dy_ab)
    params.enc_ab_w.grad += dw_ab
    params.enc_ab_b.grad += db_ab
    dcat_ac, dw_ac, db_ac = fully_connected_backward(ctx.fc_ac_ctx, dy_ac)
    params.enc_ac_w.grad += dw_ac
    params.enc_ac_b.grad += db_ac
    d_ea = dcat_ab[:, :n] + dcat_ac[:, :n]
    d_eb = dcat_ab[:, n:]
    d_ec = dcat_ac[:, n:]
    return d_ea, d_eb, d_ec


def predict_d(embedder_params, annr_params: AnnrParams, a: str, b: str, c: str,
              charset) -> np.ndarray:
    """Predicted embedding of the fourth word for one a:b::c:? query."""
    from .embedder import embed_batch

    emb, _ = embed_batch(embedder_params, [a, b, c], charset)
    out, _ = annr_forward(annr_params, emb[0:1], emb[1:2], emb[2:3])
    return out[0]
