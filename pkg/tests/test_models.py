"""Embedder and head-model tests, including composite gradient checks.

The composite checks run in float64 shadow mode with reduced dimensions
(4-d embeddings from two filter widths) so that central finite differences
over every parameter stay tractable.
"""

import numpy as np
import pytest

from morphoanalogy import annc, annr, embedder
from morphoanalogy import numkit as nk
from morphoanalogy.corpus import Quadruple, build_charset
from morphoanalogy.numkit import Rng

from helpers import assert_grads_close, embed_word_oracle, fd_grad

N_SEEDS = 10


def tiny_embedder(seed, charset, m=3, widths=(2, 3), filters=2, dtype=np.float64):
    params = embedder.init_embedder(charset, m, Rng(seed), widths=widths,
                                    filters_per_width=filters)
    if dtype is not None:
        for p in params.parameters():
            p.value = p.value.astype(dtype)
            p.grad = p.grad.astype(dtype)
    return params


class TestEmbedWord:
    def test_output_dimension_default_config(self):
        charset = build_charset(["abc"])
        params = embedder.init_embedder(charset, 64, Rng(0))
        vec = embedder.embed_word(params, "ab", charset)
        assert vec.shape == (80,)
        assert params.out_dim == 80

    def test_deterministic(self):
        charset = build_charset(["abc"])
        params = embedder.init_embedder(charset, 8, Rng(1))
        v1 = embedder.embed_word(params, "cab", charset)
        v2 = embedder.embed_word(params, "cab", charset)
        np.testing.assert_array_equal(v1, v2)

    def test_same_seed_same_parameters(self):
        charset = build_charset(["abc"])
        a = embedder.init_embedder(charset, 8, Rng(7))
        b = embedder.init_embedder(charset, 8, Rng(7))
        for pa, pb in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(pa.value, pb.value)

    def test_parameter_shapes(self):
        charset = build_charset(["ab" * 15])  # 2 distinct chars... use richer set
        charset = build_charset(["".join(chr(ord('a') + i) for i in range(26)) + "xyz"])
        params = embedder.init_embedder(charset, 64, Rng(0))
        assert params.char_matrix.shape == (26 + 4, 64)
        assert sum(w.shape[0] for w in params.conv_weights.values()) == 80
        for width, w in params.conv_weights.items():
            assert w.shape == (16, 1, width, 64)

    def test_pad_row_is_zero(self):
        charset = build_charset(["ab"])
        params = embedder.init_embedder(charset, 8, Rng(0))
        assert not params.char_matrix.value[0].any()

    @pytest.mark.parametrize("seed", range(N_SEEDS))
    @pytest.mark.parametrize("word", ["a", "xy", "abcdefg"])
    def test_matches_direct_summation_oracle(self, seed, word):
        charset = build_charset(["abcdefgxy"])
        params = tiny_embedder(seed, charset, m=4, widths=(2, 3, 4), filters=3)
        got = embedder.embed_word(params, word, charset)

        ids = embedder.encode_word(word, charset, min_length=4)
        char_rows = {i: params.char_matrix.value[i] for i in range(len(charset))}
        conv_w = {w: params.conv_weights[w].value[:, 0] for w in (2, 3, 4)}
        conv_b = {w: params.conv_biases[w].value for w in (2, 3, 4)}
        want = embed_word_oracle(char_rows, ids, conv_w, conv_b)
        np.testing.assert_allclose(got, want, rtol=1e-10)

    def test_padding_rule(self):
        charset = build_charset(["abcdef"])
        assert len(embedder.encode_word("a", charset)) == 6
        assert len(embedder.encode_word("abc", charset)) == 6
        assert len(embedder.encode_word("abcde", charset)) == 7

    def test_batch_equals_single(self):
        # agreement up to float32 GEMM rounding: the batch layout pads to the
        # longest word, which changes BLAS blocking but not the math
        charset = build_charset(["abcdef"])
        params = embedder.init_embedder(charset, 8, Rng(3))
        words = ["a", "abcdef", "fed", "abba"]
        batched, _ = embedder.embed_batch(params, words, charset)
        for i, word in enumerate(words):
            single = embedder.embed_word(params, word, charset)
            np.testing.assert_allclose(batched[i], single, rtol=1e-6, atol=1e-6)

    def test_unknown_characters_counted(self):
        charset = build_charset(["ab"])
        params = embedder.init_embedder(charset, 8, Rng(0))
        _, ctx = embedder.embed_batch(params, ["az", "zz"], charset)
        assert ctx.n_unknown == 3

    def test_empty_word_rejected(self):
        charset = build_charset(["ab"])
        with pytest.raises(ValueError):
            embedder.encode_word("", charset)

    @pytest.mark.parametrize("seed", range(N_SEEDS))
    def test_gradients(self, seed):
        charset = build_charset(["abc"])
        params = tiny_embedder(seed, charset)
        words = ["ab", "c", "bca"]
        rng = np.random.default_rng(seed)
        proj = rng.uniform(-1, 1, size=(3, params.out_dim))

        def loss():
            out, _ = embedder.embed_batch(params, words, charset)
            return float((out * proj).sum())

        out, ctx = embedder.embed_batch(params, words, charset)
        embedder.embed_batch_backward(params, ctx, proj)
        for p in params.parameters():
            assert_grads_close(p.grad, fd_grad(loss, p.value, h=1e-5))

    def test_pad_row_never_gets_gradient(self):
        charset = build_charset(["ab"])
        params = tiny_embedder(0, charset)
        out, ctx = embedder.embed_batch(params, ["a", "ab"], charset)
        embedder.embed_batch_backward(params, ctx, np.ones_like(out))
        assert not params.char_matrix.grad[0].any()


class TestAnnc:
    def test_score_range_and_determinism(self):
        params = annc.init_annc(8, Rng(0))
        rng = np.random.default_rng(1)
        stack = rng.normal(size=(5, 4, 8)).astype(np.float32)
        s1, _ = annc.annc_forward(params, stack)
        s2, _ = annc.annc_forward(params, stack)
        assert ((s1 > 0) & (s1 < 1)).all()
        np.testing.assert_array_equal(s1, s2)

    def test_zero_parameters_give_half(self):
        params = annc.init_annc(4, Rng(0))
        for p in params.parameters():
            p.value[...] = 0.0
        stack = np.random.default_rng(0).normal(size=(3, 4, 4)).astype(np.float32)
        scores, _ = annc.annc_forward(params, stack)
        np.testing.assert_array_equal(scores, 0.5)

    def test_odd_dimension_rejected(self):
        with pytest.raises(ValueError):
            annc.init_annc(5, Rng(0))

    def test_decide_threshold(self):
        assert annc.decide(0.7)
        assert annc.decide(0.5)  # boundary counts as valid
        assert not annc.decide(0.49)
        with pytest.raises(ValueError):
            annc.decide(0.5, threshold=0.0)

    @pytest.mark.parametrize("seed", range(N_SEEDS))
    def test_composite_gradients_with_embedder(self, seed):
        # full embedder -> stack -> classifier -> bce pipeline, n reduced to 4
        charset = build_charset(["abcd"])
        e_params = tiny_embedder(seed, charset)  # out_dim = 4
        c_params = annc.init_annc(4, Rng(seed + 100), conv1_filters=3, conv2_filters=2)
        for p in c_params.parameters():
            p.value = p.value.astype(np.float64)
            p.grad = p.grad.astype(np.float64)
        words = ["ab", "cd", "ad", "cb"]
        label = np.array([1.0])

        def loss():
            emb, _ = embedder.embed_batch(e_params, words, charset)
            scores, _ = annc.annc_forward(c_params, emb[None, :, :])
            losses, _ = nk.bce_loss(label, scores)
            return float(losses.sum())

        emb, e_ctx = embedder.embed_batch(e_params, words, charset)
        scores, c_ctx = annc.annc_forward(c_params, emb[None, :, :])
        losses, b_ctx = nk.bce_loss(label, scores)
        dscores = nk.bce_loss_backward(b_ctx, np.ones(1))
        dstack = annc.annc_backward(c_params, c_ctx, dscores)
        embedder.embed_batch_backward(e_params, e_ctx, dstack[0])

        for p in e_params.parameters() + c_params.parameters():
            assert_grads_close(p.grad, fd_grad(loss, p.value, h=1e-5))

    def test_classify_wrapper(self):
        charset = build_charset(["abcd"])
        e_params = embedder.init_embedder(charset, 8, Rng(0))
        c_params = annc.init_annc(80, Rng(1))
        score = annc.classify(e_params, c_params, Quadruple("a", "b", "c", "d"), charset)
        assert 0.0 < score < 1.0


class TestAnnr:
    def test_output_dimension(self):
        params = annr.init_annr(80, Rng(0))
        rng = np.random.default_rng(0)
        e = [rng.normal(size=(2, 80)).astype(np.float32) for _ in range(3)]
        out, _ = annr.annr_forward(params, *e)
        assert out.shape == (2, 80)

    def test_zero_parameters_give_zero_vector(self):
        params = annr.init_annr(8, Rng(0))
        for p in params.parameters():
            p.value[...] = 0.0
        e = [np.random.default_rng(1).normal(size=(3, 8)).astype(np.float32) for _ in range(3)]
        out, _ = annr.annr_forward(params, *e)
        assert not out.any()

    @pytest.mark.parametrize("seed", range(N_SEEDS))
    def test_composite_gradients_with_embedder_and_ratio_loss(self, seed):
        charset = build_charset(["abcd"])
        e_params = tiny_embedder(seed, charset)  # out_dim = 4
        r_params = annr.init_annr(4, Rng(seed + 200))
        for p in r_params.parameters():
            p.value = p.value.astype(np.float64)
            p.grad = p.grad.astype(np.float64)
        words = ["ab", "cd", "ad", "cb"]

        def loss():
            emb, _ = embedder.embed_batch(e_params, words, charset)
            ea, eb, ec, ed = (emb[i:i + 1] for i in range(4))
            pred, _ = annr.annr_forward(r_params, ea, eb, ec)
            losses, _ = nk.ratio_loss(ea, eb, ec, ed, pred)
            return float(losses.sum())

        emb, e_ctx = embedder.embed_batch(e_params, words, charset)
        ea, eb, ec, ed = (emb[i:i + 1] for i in range(4))
        pred, r_ctx = annr.annr_forward(r_params, ea, eb, ec)
        losses, l_ctx = nk.ratio_loss(ea, eb, ec, ed, pred)
        da, db, dc, dd, dpred = nk.ratio_loss_backward(l_ctx, np.ones(1))
        ra, rb, rc = annr.annr_backward(r_params, r_ctx, dpred)
        demb = np.concatenate([da + ra, db + rb, dc + rc, dd], axis=0)
        embedder.embed_batch_backward(e_params, e_ctx, demb)

        for p in e_params.parameters() + r_params.parameters():
            assert_grads_close(p.grad, fd_grad(loss, p.value, h=1e-5))

    def test_single_training_step_reduces_loss(self):
        # one Adam step on one example must strictly decrease that example's
        # loss when gradients are nonzero
        charset = build_charset(["abcdefgh"])
        for seed in range(5):
            e_params = embedder.init_embedder(charset, 8, Rng(seed))
            r_params = annr.init_annr(80, Rng(seed + 50))
            words = ["abc", "def", "gh", "be"]

            def run(update):
                emb, e_ctx = embedder.embed_batch(e_params, words, charset)
                ea, eb, ec, ed = (emb[i:i + 1] for i in range(4))
                pred, r_ctx = annr.annr_forward(r_params, ea, eb, ec)
                losses, l_ctx = nk.ratio_loss(ea, eb, ec, ed, pred)
                if update:
                    da, db, dc, dd, dpred = nk.ratio_loss_backward(l_ctx, np.ones(1))
                    ra, rb, rc = annr.annr_backward(r_params, r_ctx, dpred)
                    demb = np.concatenate([da + ra, db + rb, dc + rc, dd], axis=0)
                    embedder.embed_batch_backward(e_params, e_ctx, demb)
                return float(losses.sum())

            before = run(update=True)
            all_params = e_params.parameters() + r_params.parameters()
            assert any(p.grad.any() for p in all_params)
            nk.adam_step(all_params, lr=1e-4)
            after = run(update=False)
            assert after < before

    def test_predict_d_wrapper(self):
        charset = build_charset(["abcd"])
        e_params = embedder.init_embedder(charset, 8, Rng(0))
        r_params = annr.init_annr(80, Rng(1))
        vec = annr.predict_d(e_params, r_params, "a", "b", "c", charset)
        assert vec.shape == (80,)
