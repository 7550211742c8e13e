"""Dense tensor ops with hand-written backward passes.

Every op is a pure function over numpy arrays. Ops that participate in
training return ``(output, ctx)`` where ``ctx`` is consumed by the matching
``*_backward`` function; the backward passes mirror the forward graphs
exactly and are verified against central finite differences in the test
suite. Arrays are float32 in production; float64 inputs are accepted and
preserved so gradients can be checked in higher precision.

Forward outputs are checked for NaN/Inf and raise :class:`NumericError`
(toggle with ``set_finite_checks`` for micro-benchmarks only).
"""

from __future__ import annotations

from typing import NamedTuple, Optional

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .rng import Rng

BCE_EPS = 1e-7

_finite_checks = True


class NumericError(ArithmeticError):
    """A kernel op produced a non-finite value."""


class DimensionError(ValueError):
    """Operand shapes are incompatible with the op's contract."""


def set_finite_checks(enabled: bool) -> bool:
    """Enable/disable NaN/Inf output checks; returns the previous setting."""
    global _finite_checks
    previous = _finite_checks
    _finite_checks = bool(enabled)
    return previous


def _check_finite(name: str, arr: np.ndarray) -> None:
    if _finite_checks and not np.isfinite(arr).all():
        bad = int(np.size(arr) - np.count_nonzero(np.isfinite(arr)))
        raise NumericError(f"{name}: {bad} non-finite value(s) in output of shape {arr.shape}")


# ---------------------------------------------------------------------------
# convolution


class Conv2dCtx(NamedTuple):
    cols: np.ndarray        # (B*OH*OW, C*KH*KW)
    x_shape: tuple
    w: np.ndarray
    stride: tuple
    out_hw: tuple


def _window_view(x: np.ndarray, kh: int, kw: int, sh: int, sw: int):
    b, c, h, w = x.shape
    oh = (h - kh) // sh + 1
    ow = (w - kw) // sw + 1
    sb, sc, srow, scol = x.strides
    shape = (b, c, oh, ow, kh, kw)
    strides = (sb, sc, srow * sh, scol * sw, srow, scol)
    return as_strided(x, shape=shape, strides=strides), oh, ow


def conv2d(x: np.ndarray, w: np.ndarray, b: Optional[np.ndarray], stride=(1, 1)):
    """Valid cross-correlation with per-filter bias.

    x: (B, C, H, W), w: (F, C, KH, KW), b: (F,) or None. Output extents are
    floor((in - filter) / stride) + 1 per spatial axis; any zero padding is
    the caller's responsibility.
    """
    if x.ndim != 4 or w.ndim != 4:
        raise DimensionError(f"conv2d expects 4-d input and filters, got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise DimensionError(f"channel mismatch: input {x.shape[1]} vs filters {w.shape[1]}")
    if w.shape[2] > x.shape[2] or w.shape[3] > x.shape[3]:
        raise DimensionError(f"filter {w.shape[2:]} larger than input {x.shape[2:]}")
    sh, sw = stride
    if sh < 1 or sw < 1:
        raise DimensionError(f"strides must be >= 1, got {stride}")

    nb = x.shape[0]
    nf, _, kh, kw = w.shape
    windows, oh, ow = _window_view(x, kh, kw, sh, sw)
    # copy into (B*OH*OW, C*KH*KW) so a single GEMM does everything
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(nb * oh * ow, -1)
    out = cols @ w.reshape(nf, -1).T
    if b is not None:
        out += b
    out = out.reshape(nb, oh, ow, nf).transpose(0, 3, 1, 2)
    out = np.ascontiguousarray(out)
    _check_finite("conv2d", out)
    return out, Conv2dCtx(cols, x.shape, w, (sh, sw), (oh, ow))


def conv2d_backward(ctx: Conv2dCtx, dout: np.ndarray):
    """Gradients of conv2d w.r.t. (input, filters, bias)."""
    nb, c, h, w_in = ctx.x_shape
    nf, _, kh, kw = ctx.w.shape
    sh, sw = ctx.stride
    oh, ow = ctx.out_hw

    dflat = dout.transpose(0, 2, 3, 1).reshape(-1, nf)
    dw = (dflat.T @ ctx.cols).reshape(ctx.w.shape)
    db = dflat.sum(axis=0)
    dcols = (dflat @ ctx.w.reshape(nf, -1)).reshape(nb, oh, ow, c, kh, kw)

    dx = np.zeros(ctx.x_shape, dtype=dout.dtype)
    for i in range(kh):
        rows = slice(i, i + sh * oh, sh)
        if kw == w_in and ow == 1:
            # full-width kernel: one strided add covers the whole row block
            dx[:, :, rows, :] += dcols[:, :, 0, :, i, :].transpose(0, 2, 1, 3)
        else:
            for j in range(kw):
                cols_ = slice(j, j + sw * ow, sw)
                dx[:, :, rows, cols_] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dx, dw, db


# ---------------------------------------------------------------------------
# pooling


class MaxPosCtx(NamedTuple):
    argmax: np.ndarray   # (B, F)
    x_shape: tuple


def max_over_positions(x: np.ndarray, valid: Optional[np.ndarray] = None):
    """Maximum over the position axis, one scalar per (batch, filter).

    x: (B, F, P). ``valid`` is an optional (B, P) bool mask; masked positions
    never win. Ties break toward the lowest position index, and the backward
    pass routes the incoming gradient entirely to the winning position.
    """
    if x.ndim != 3:
        raise DimensionError(f"max_over_positions expects (B, F, P), got {x.shape}")
    if valid is not None:
        masked = np.where(valid[:, None, :], x, -np.inf)
    else:
        masked = x
    amax = np.argmax(masked, axis=2)
    out = np.take_along_axis(masked, amax[:, :, None], axis=2)[:, :, 0]
    _check_finite("max_over_positions", out)
    return out, MaxPosCtx(amax, x.shape)


def max_over_positions_backward(ctx: MaxPosCtx, dout: np.ndarray) -> np.ndarray:
    dx = np.zeros(ctx.x_shape, dtype=dout.dtype)
    np.put_along_axis(dx, ctx.argmax[:, :, None], dout[:, :, None], axis=2)
    return dx


# ---------------------------------------------------------------------------
# dense / activations


class FcCtx(NamedTuple):
    x: np.ndarray
    w: np.ndarray


def fully_connected(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Affine map y = x @ w + b with x: (B, In), w: (In, Out), b: (Out,)."""
    if x.shape[-1] != w.shape[0]:
        raise DimensionError(f"fc shape mismatch: input {x.shape} vs weight {w.shape}")
    out = x @ w + b
    _check_finite("fully_connected", out)
    return out, FcCtx(x, w)


def fully_connected_backward(ctx: FcCtx, dout: np.ndarray):
    dx = dout @ ctx.w.T
    dw = ctx.x.T @ dout
    db = dout.sum(axis=0)
    return dx, dw, db


def relu(x: np.ndarray):
    out = np.maximum(x, 0)
    _check_finite("relu", out)
    return out, x > 0


def relu_backward(mask: np.ndarray, dout: np.ndarray) -> np.ndarray:
    return dout * mask


def sigmoid(x: np.ndarray):
    """Numerically stable logistic function, output in (0, 1)."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    _check_finite("sigmoid", out)
    return out, out


def sigmoid_backward(out: np.ndarray, dout: np.ndarray) -> np.ndarray:
    return dout * out * (1.0 - out)


# ---------------------------------------------------------------------------
# losses


class BceCtx(NamedTuple):
    labels: np.ndarray
    clamped: np.ndarray
    inside: np.ndarray   # where the clamp was inactive


def bce_loss(labels: np.ndarray, preds: np.ndarray):
    """Binary cross-entropy -(l*log(p) + (1-l)*log(1-p)), elementwise.

    Predictions are clamped to [eps, 1-eps] (eps = 1e-7) before the logs, so
    the loss is finite for any prediction in [0, 1].
    """
    labels = np.asarray(labels)
    preds = np.asarray(preds)
    clamped = np.clip(preds, BCE_EPS, 1.0 - BCE_EPS)
    loss = -(labels * np.log(clamped) + (1.0 - labels) * np.log1p(-clamped))
    _check_finite("bce_loss", loss)
    inside = (preds >= BCE_EPS) & (preds <= 1.0 - BCE_EPS)
    return loss, BceCtx(labels, clamped, inside)


def bce_loss_backward(ctx: BceCtx, dloss: np.ndarray) -> np.ndarray:
    grad = (-ctx.labels / ctx.clamped + (1.0 - ctx.labels) / (1.0 - ctx.clamped))
    return dloss * grad * ctx.inside


def mse(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Mean squared difference over the last axis."""
    if u.shape != v.shape:
        raise DimensionError(f"mse length mismatch: {u.shape} vs {v.shape}")
    d = u - v
    return np.mean(d * d, axis=-1)


class RatioLossCtx(NamedTuple):
    ea: np.ndarray
    eb: np.ndarray
    ec: np.ndarray
    ed: np.ndarray
    ed_hat: np.ndarray
    num: np.ndarray
    den: np.ndarray


def ratio_loss(ea, eb, ec, ed, ed_hat):
    """Prediction error relative to the spread of the four embeddings.

    Per row: 6 * mse(d, d_hat) / (1 + sum of mse over the six unordered pairs
    of {a, b, c, d}). The denominator is >= 1, so the loss is finite, >= 0,
    and zero exactly when d_hat equals d.
    """
    num = 6.0 * mse(ed, ed_hat)
    den = 1.0 + (mse(ea, eb) + mse(ea, ec) + mse(ea, ed)
                 + mse(eb, ec) + mse(eb, ed) + mse(ec, ed))
    loss = num / den
    _check_finite("ratio_loss", loss)
    return loss, RatioLossCtx(ea, eb, ec, ed, ed_hat, num, den)


def ratio_loss_backward(ctx: RatioLossCtx, dloss: np.ndarray):
    """Gradients w.r.t. all five input vectors; dloss has shape (B,)."""
    n = ctx.ea.shape[-1]
    den = ctx.den[..., None]
    scale = dloss[..., None]
    # numerator reaches d and d_hat; the denominator reaches a, b, c, d
    ratio = (ctx.num / (ctx.den * ctx.den))[..., None]
    two_n = 2.0 / n

    d_hat = scale * (6.0 * two_n * (ctx.ed_hat - ctx.ed)) / den
    da = scale * (-ratio) * two_n * (3.0 * ctx.ea - ctx.eb - ctx.ec - ctx.ed)
    db = scale * (-ratio) * two_n * (3.0 * ctx.eb - ctx.ea - ctx.ec - ctx.ed)
    dc = scale * (-ratio) * two_n * (3.0 * ctx.ec - ctx.ea - ctx.eb - ctx.ed)
    dd = scale * (6.0 * two_n * (ctx.ed - ctx.ed_hat) / den
                  - ratio * two_n * (3.0 * ctx.ed - ctx.ea - ctx.eb - ctx.ec))
    return da, db, dc, dd, d_hat


# ---------------------------------------------------------------------------
# embedding table


class LookupCtx(NamedTuple):
    ids: np.ndarray
    table_shape: tuple


def embedding_lookup(table: np.ndarray, ids: np.ndarray):
    """Row gather: out[..., :] = table[ids[...], :]."""
    out = table[ids]
    _check_finite("embedding_lookup", out)
    return out, LookupCtx(ids, table.shape)


def embedding_lookup_backward(ctx: LookupCtx, dout: np.ndarray) -> np.ndarray:
    dtable = np.zeros(ctx.table_shape, dtype=dout.dtype)
    np.add.at(dtable, ctx.ids.reshape(-1), dout.reshape(-1, ctx.table_shape[1]))
    return dtable


# ---------------------------------------------------------------------------
# perturbation


def dropout(x: np.ndarray, p_d: float, rng: Rng) -> np.ndarray:
    """Zero each component independently with probability p_d; no rescaling.

    p_d = 0 returns the input unchanged (bitwise, no rng draw) and p_d = 1
    returns all zeros, so composing with p_d = 0 is exactly the identity.
    """
    if not 0.0 <= p_d <= 1.0:
        raise ValueError(f"dropout probability must be in [0, 1], got {p_d}")
    if p_d == 0.0:
        return x
    if p_d == 1.0:
        return np.zeros_like(x)
    keep = rng.gen.random(x.shape) >= p_d
    return x * keep
