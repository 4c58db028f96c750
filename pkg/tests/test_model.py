import math

import numpy as np
import pytest

from conftest import gradcheck
from sanlm import corpus as C
from sanlm.errors import (ParameterError, SequenceTooLongError,
                          VocabularyError)
from sanlm.model import LanguageModel, ModelConfig
from sanlm.rng import RngState
from sanlm.tensor import backward


def mlm_batch(vocab, rng, sentences):
    instances = [C.make_mlm_instance(C.tokenize(s), vocab, rng, 16)
                 for s in sentences]
    return C.make_batch(instances)


class TestEmbed:
    def test_zero_tables_give_zero(self, bi_config):
        model = LanguageModel.zeros(bi_config)
        np.testing.assert_array_equal(model.embed([1, 2, 3]).data, 0.0)

    def test_single_token_is_word_plus_position(self, bi_model):
        out = bi_model.embed([5]).data
        expected = (bi_model.params.embedding.data[5]
                    + bi_model.params.positions.data[0])
        np.testing.assert_array_equal(out[0], expected)

    def test_repeated_token_rows_differ_by_position(self, bi_model):
        out = bi_model.embed([5, 5]).data
        delta = (bi_model.params.positions.data[1]
                 - bi_model.params.positions.data[0])
        np.testing.assert_allclose(out[1] - out[0], delta, atol=1e-12)

    def test_too_long_rejected(self, bi_model):
        with pytest.raises(SequenceTooLongError):
            bi_model.embed(list(range(5)) * 4)

    def test_out_of_vocab_id_rejected(self, bi_model):
        with pytest.raises(VocabularyError):
            bi_model.embed([bi_model.config.vocab_size])


class TestForward:
    def test_rows_are_normalized(self, bi_model):
        lp = bi_model.forward(np.array([1, 2, 3, 4])).data
        lse = np.log(np.exp(lp).sum(axis=-1))
        np.testing.assert_allclose(lse, 0.0, atol=1e-6)

    def test_zero_model_is_uniform(self, bi_config):
        model = LanguageModel.zeros(bi_config)
        lp = model.forward(np.array([1, 2, 3])).data
        np.testing.assert_allclose(lp, -math.log(bi_config.vocab_size),
                                   atol=1e-12)

    def test_unidirectional_causality(self, uni_model):
        ids = np.array([2, 5, 6, 7, 8])
        base = uni_model.forward(ids).data
        changed = ids.copy()
        changed[-1] = 9
        out = uni_model.forward(changed).data
        np.testing.assert_array_equal(out[:-1], base[:-1])

    def test_bidirectional_uses_both_sides(self, bi_model):
        ids = np.array([5, C.MASK_ID, 7, 8])
        base = bi_model.forward(ids).data[1]
        for pos in (0, 2, 3):
            changed = ids.copy()
            changed[pos] = 9
            assert not np.allclose(bi_model.forward(changed).data[1], base)


class TestWeightTying:
    def test_output_projection_is_embedding_storage(self, bi_model):
        ids = np.array([1, 2, 3])
        before = bi_model.forward(ids).data.copy()
        bi_model.params.embedding.data[7, 0] += 0.5
        after = bi_model.forward(ids).data
        assert not np.allclose(before, after)

    def test_tying_survives_optimizer_step(self, bi_model, vocab):
        from sanlm.optim import Adam

        rng = RngState(0)
        batch = mlm_batch(vocab, rng, ["move the vat", "the hot fire"])
        opt = Adam(bi_model.parameters(), lr=1e-3)
        backward(bi_model.mlm_loss(batch))
        opt.step()
        # still one storage: perturbing E must move the logits
        ids = np.array([1, 2, 3])
        before = bi_model.forward(ids).data.copy()
        bi_model.params.embedding.data += 0.1
        assert not np.allclose(bi_model.forward(ids).data, before)


class TestLosses:
    def test_zero_model_mlm_loss_is_log_v(self, bi_config, vocab):
        model = LanguageModel.zeros(bi_config)
        batch = mlm_batch(vocab, RngState(1), ["move the vat over the hot fire"])
        loss = model.mlm_loss(batch)
        assert abs(loss.item() - math.log(bi_config.vocab_size)) < 1e-12

    def test_mlm_loss_matches_hand_aggregation(self, bi_model, vocab):
        i1 = C.TrainingInstance("bidirectional", [C.MASK_ID, 6, 7], [5], [0])
        i2 = C.TrainingInstance("bidirectional",
                                [C.MASK_ID, 6, C.MASK_ID, 8, C.MASK_ID],
                                [5, 7, 9], [0, 2, 4])
        loss = bi_model.mlm_loss(C.make_batch([i1, i2])).item()
        lp1 = bi_model.forward(np.array(i1.input_ids)).data
        lp2 = bi_model.forward(np.array(i2.input_ids)).data
        hand = -(lp1[0, 5] + lp2[0, 5] + lp2[2, 7] + lp2[4, 9]) / 4
        assert abs(loss - hand) < 1e-9

    def test_mlm_loss_order_invariant(self, bi_model, vocab):
        rng = RngState(2)
        insts = [C.make_mlm_instance(C.tokenize(s), vocab, rng, 16)
                 for s in ["move the vat", "the hot fire", "over the vat"]]
        a = bi_model.mlm_loss(C.make_batch(insts)).item()
        b = bi_model.mlm_loss(C.make_batch(insts[::-1])).item()
        assert abs(a - b) < 1e-12

    def test_zero_model_next_word_loss_is_log_v(self, uni_config, vocab):
        model = LanguageModel.zeros(uni_config)
        inst = C.make_unilm_instance(["move", "the", "vat"], vocab)
        loss = model.next_word_loss(C.make_batch([inst]))
        assert abs(loss.item() - math.log(uni_config.vocab_size)) < 1e-12

    def test_single_word_sentence_single_term(self, uni_model, vocab):
        inst = C.make_unilm_instance(["fire"], vocab)
        loss = uni_model.next_word_loss(C.make_batch([inst])).item()
        lp = uni_model.forward(np.array(inst.input_ids)).data
        fire = vocab.id("fire")
        hand = -(lp[0, fire] + lp[1, C.EOS_ID]) / 2
        assert abs(loss - hand) < 1e-12

    def test_loss_deterministic_with_seed(self, uni_model, vocab):
        inst = C.make_unilm_instance(["move", "the", "vat"], vocab)
        batch = C.make_batch([inst])
        a = uni_model.next_word_loss(batch, training=True, rng=RngState(3)).item()
        b = uni_model.next_word_loss(batch, training=True, rng=RngState(3)).item()
        assert a == b

    def test_mode_mismatch_rejected(self, bi_model, uni_model, vocab):
        inst = C.make_unilm_instance(["fire"], vocab)
        with pytest.raises(ParameterError):
            bi_model.next_word_loss(C.make_batch([inst]))


class TestPaddingNeutrality:
    def test_real_rows_unaffected_by_padding(self, bi_model):
        short = np.array([5, 6, 7])
        long = np.array([5, 6, 7, 8, 9, 6, 7])
        alone = bi_model.forward(short).data
        inputs = np.full((2, 7), C.PAD_ID, dtype=np.int64)
        valid = np.zeros((2, 7), dtype=bool)
        inputs[0, :3], valid[0, :3] = short, True
        inputs[1], valid[1] = long, True
        batched = bi_model.forward_batch(inputs, valid).data
        np.testing.assert_allclose(batched[0, :3], alone, atol=1e-9)

    def test_padded_batch_loss_equals_unpadded_mean(self, bi_model, vocab):
        i1 = C.TrainingInstance("bidirectional", [C.MASK_ID, 6, 7], [5], [0])
        i2 = C.TrainingInstance("bidirectional", [5, 6, C.MASK_ID, 8, 9], [7], [2])
        padded = bi_model.mlm_loss(C.make_batch([i1, i2])).item()
        l1 = bi_model.mlm_loss(C.make_batch([i1])).item()
        l2 = bi_model.mlm_loss(C.make_batch([i2])).item()
        assert abs(padded - (l1 + l2) / 2) < 1e-9


class TestFullModelGradient:
    def test_mlm_gradient_matches_finite_differences(self, vocab):
        config = ModelConfig(mode="bidirectional", vocab_size=len(vocab),
                             num_layers=1, model_dim=8, num_heads=2,
                             ffn_dim=12, max_len=8, dropout_p=0.0)
        model = LanguageModel.create(config, RngState(21))
        inst = C.TrainingInstance("bidirectional",
                                  [5, C.MASK_ID, 7, 8], [6], [1])
        batch = C.make_batch([inst])

        def loss():
            return model.mlm_loss(batch).item()

        backward(model.mlm_loss(batch))
        gradcheck(loss, model.parameters())

    def test_causal_gradient_matches_finite_differences(self, vocab):
        config = ModelConfig(mode="unidirectional", vocab_size=len(vocab),
                             num_layers=1, model_dim=8, num_heads=2,
                             ffn_dim=12, max_len=8, dropout_p=0.0)
        model = LanguageModel.create(config, RngState(22))
        inst = C.make_unilm_instance(["move", "the", "vat"],
                                     vocab_from_model(model))
        batch = C.make_batch([inst])

        def loss():
            return model.next_word_loss(batch).item()

        backward(model.next_word_loss(batch))
        gradcheck(loss, model.parameters())


def vocab_from_model(model):
    from conftest import tiny_vocab

    return tiny_vocab()
