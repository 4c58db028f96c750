import math

import numpy as np
import pytest

from sanlm import corpus as C
from sanlm.errors import DataError, ParameterError
from sanlm.model import LanguageModel, ModelConfig
from sanlm.rng import RngState
from sanlm.scoring import (expand_masked_instances, score_bidirectional,
                           score_unidirectional)


@pytest.fixture
def vocab():
    return C.build_vocab(["move the vat over the hot fire"], 10)


class TestExpandMaskedInstances:
    def test_seven_word_example(self, vocab):
        ids = vocab.encode(C.tokenize("move the vat over the hot fire"))
        instances = expand_masked_instances(ids)
        assert len(instances) == 7
        assert instances[0][0] == C.MASK_ID
        assert instances[0][1:] == ids[1:]

    def test_single_word(self):
        assert expand_masked_instances([7]) == [[C.MASK_ID]]

    def test_each_position_masked_exactly_once(self, vocab):
        ids = vocab.encode(["the", "hot", "vat", "fire"])
        instances = expand_masked_instances(ids)
        masked = [inst.index(C.MASK_ID) for inst in instances]
        assert masked == [0, 1, 2, 3]
        for i, inst in enumerate(instances):
            assert sum(1 for x in inst if x == C.MASK_ID) == 1
            assert inst[:i] == ids[:i] and inst[i + 1:] == ids[i + 1:]

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            expand_masked_instances([])


class TestScoreBidirectional:
    def test_zero_model_sums_uniform_terms(self, vocab):
        config = ModelConfig(mode="bidirectional", vocab_size=len(vocab),
                             num_layers=1, model_dim=8, num_heads=2,
                             ffn_dim=16, max_len=16)
        model = LanguageModel.zeros(config)
        tokens = C.tokenize("move the vat over the hot fire")
        score = score_bidirectional(model, tokens, vocab)
        assert abs(score.total + 7 * math.log(len(vocab))) < 1e-9
        assert score.length == 7
        assert len(score.per_word) == 7

    def test_total_is_sum_of_terms(self, vocab, bi_scoring_model):
        score = score_bidirectional(bi_scoring_model,
                                    C.tokenize("the hot fire"), vocab)
        assert abs(score.total - sum(v for _, _, v in score.per_word)) < 1e-9
        assert score.total <= 0.0

    def test_batching_does_not_change_total(self, vocab, bi_scoring_model):
        tokens = C.tokenize("move the vat over the hot fire")
        full = score_bidirectional(bi_scoring_model, tokens, vocab)
        singly = score_bidirectional(bi_scoring_model, tokens, vocab,
                                     batch_size=1)
        assert abs(full.total - singly.total) < 1e-9

    def test_oov_counted_and_scored_as_unk(self, vocab, bi_scoring_model):
        score = score_bidirectional(bi_scoring_model,
                                    ["the", "zebra", "fire"], vocab)
        assert score.oov_count == 1
        assert len(score.per_word) == 3

    def test_wrong_mode_rejected(self, vocab, uni_scoring_model):
        with pytest.raises(ParameterError):
            score_bidirectional(uni_scoring_model, ["the"], vocab)

    def test_empty_rejected(self, vocab, bi_scoring_model):
        with pytest.raises(DataError):
            score_bidirectional(bi_scoring_model, [], vocab)

    def test_overlong_truncated_with_warning(self, vocab, bi_scoring_model):
        tokens = ["the"] * 20
        score = score_bidirectional(bi_scoring_model, tokens, vocab)
        assert score.length == bi_scoring_model.config.max_len


class TestScoreUnidirectional:
    def test_zero_model_sums_uniform_terms(self, vocab):
        config = ModelConfig(mode="unidirectional", vocab_size=len(vocab),
                             num_layers=1, model_dim=8, num_heads=2,
                             ffn_dim=16, max_len=16)
        model = LanguageModel.zeros(config)
        score = score_unidirectional(model, C.tokenize("the hot fire"), vocab)
        assert abs(score.total + 3 * math.log(len(vocab))) < 1e-9

    def test_single_word_single_term(self, vocab, uni_scoring_model):
        score = score_unidirectional(uni_scoring_model, ["fire"], vocab)
        assert len(score.per_word) == 1
        lp = uni_scoring_model.forward(np.array([C.BOS_ID])).data
        assert abs(score.per_word[0][2] - lp[0, vocab.id("fire")]) < 1e-12

    def test_matches_per_prefix_oracle(self, vocab, uni_scoring_model):
        tokens = C.tokenize("move the vat over")
        ids = vocab.encode(tokens)
        score = score_unidirectional(uni_scoring_model, tokens, vocab)
        for i in range(len(ids)):
            prefix = np.array([C.BOS_ID] + ids[:i])
            lp = uni_scoring_model.forward(prefix).data
            assert abs(score.per_word[i][2] - lp[i, ids[i]]) < 1e-9

    def test_term_counts_match_bidirectional(self, vocab, uni_scoring_model,
                                             bi_scoring_model):
        tokens = C.tokenize("move the vat over the hot fire")
        uni = score_unidirectional(uni_scoring_model, tokens, vocab)
        bi = score_bidirectional(bi_scoring_model, tokens, vocab)
        assert len(uni.per_word) == len(bi.per_word) == 7

    def test_deterministic(self, vocab, uni_scoring_model):
        tokens = C.tokenize("the vat")
        a = score_unidirectional(uni_scoring_model, tokens, vocab)
        b = score_unidirectional(uni_scoring_model, tokens, vocab)
        assert a.total == b.total


@pytest.fixture
def bi_scoring_model(vocab):
    config = ModelConfig(mode="bidirectional", vocab_size=len(vocab),
                         num_layers=2, model_dim=16, num_heads=2,
                         ffn_dim=32, max_len=16)
    return LanguageModel.create(config, RngState(31))


@pytest.fixture
def uni_scoring_model(vocab):
    config = ModelConfig(mode="unidirectional", vocab_size=len(vocab),
                         num_layers=2, model_dim=16, num_heads=2,
                         ffn_dim=32, max_len=16)
    return LanguageModel.create(config, RngState(32))
