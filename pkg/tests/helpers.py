"""Shared test oracles: finite differences and naive reference kernels."""

from __future__ import annotations

import numpy as np

GRAD_RTOL = 1e-4


def fd_grad(f, x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Central-difference gradient of scalar-valued f() w.r.t. x (in place)."""
    assert x.dtype == np.float64, "finite differences run in float64 shadow mode"
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f()
        flat[i] = orig - h
        f_minus = f()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def assert_grads_close(analytic: np.ndarray, numeric: np.ndarray, rtol: float = GRAD_RTOL):
    """Elementwise |a - n| <= rtol * max(1, |a|, |n|)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    err = np.abs(analytic - numeric) / scale
    assert err.max() <= rtol, f"gradient mismatch: max relative error {err.max():.3e}"


def conv2d_oracle(x, w, b, stride):
    """Direct-summation cross-correlation, quadruple loop."""
    nb, c, h, w_in = x.shape
    nf, _, kh, kw = w.shape
    sh, sw = stride
    oh = (h - kh) // sh + 1
    ow = (w_in - kw) // sw + 1
    out = np.zeros((nb, nf, oh, ow), dtype=np.float64)
    for bi in range(nb):
        for fi in range(nf):
            for oi in range(oh):
                for oj in range(ow):
                    acc = 0.0
                    for ci in range(c):
                        for ki in range(kh):
                            for kj in range(kw):
                                acc += x[bi, ci, oi * sh + ki, oj * sw + kj] * w[fi, ci, ki, kj]
                    out[bi, fi, oi, oj] = acc + (b[fi] if b is not None else 0.0)
    return out


def embed_word_oracle(char_rows: dict[int, np.ndarray], ids, conv_weights, conv_biases):
    """Naive single-word embedding: explicit loops over filters and positions.

    char_rows maps char id -> embedding row; conv_weights maps width ->
    (filters, width, m); conv_biases maps width -> (filters,).
    """
    seq = np.stack([char_rows[i] for i in ids])  # (L, m)
    parts = []
    for width in sorted(conv_weights):
        weights = conv_weights[width]
        biases = conv_biases[width]
        for f in range(weights.shape[0]):
            best = -np.inf
            for pos in range(len(ids) - width + 1):
                acc = float((seq[pos:pos + width] * weights[f]).sum()) + float(biases[f])
                if acc > best:
                    best = acc
            parts.append(best)
    return np.array(parts)
