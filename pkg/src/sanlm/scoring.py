"""Sentence scoring.

The bidirectional scorer masks one word at a time and sums the masked
word's log-likelihood over all positions (a pseudo-log-likelihood). The
unidirectional scorer sums next-word log-likelihoods. Both produce
exactly one term per word, so scores are directly comparable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import corpus as C
from .errors import DataError, ParameterError
from .model import BIDIRECTIONAL, UNIDIRECTIONAL, LanguageModel

log = logging.getLogger(__name__)


@dataclass
class SentenceScore:
    total: float
    per_word: list[tuple[int, str, float]]  # (position, token, log-likelihood)
    length: int
    oov_count: int

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "per_word": [[p, t, v] for p, t, v in self.per_word],
            "length": self.length,
            "oov_count": self.oov_count,
        }


def expand_masked_instances(token_ids: list[int]) -> list[list[int]]:
    """One inference instance per position, with <M> substituted there."""
    n = len(token_ids)
    if n == 0:
        raise DataError("cannot expand an empty sentence")
    instances = []
    for i in range(n):
        ids = list(token_ids)
        ids[i] = C.MASK_ID
        instances.append(ids)
    return instances


def _prepare(tokens, vocab, max_len: int, reserve: int = 0):
    tokens = list(tokens)
    if not tokens:
        raise DataError("cannot score an empty sentence")
    limit = max_len - reserve
    if len(tokens) > limit:
        log.warning("sentence of %d words truncated to %d for scoring",
                    len(tokens), limit)
        tokens = tokens[:limit]
    ids = vocab.encode(tokens)
    oov = sum(1 for i in ids if i == C.UNK_ID)
    return tokens, ids, oov


def score_bidirectional(model: LanguageModel, tokens, vocab: C.Vocabulary,
                        batch_size: int | None = None) -> SentenceScore:
    """Sum over i of log p(w_i | sentence with <M> at i)."""
    if model.config.mode != BIDIRECTIONAL:
        raise ParameterError("score_bidirectional requires a bidirectional model")
    tokens, ids, oov = _prepare(tokens, vocab, model.config.max_len)
    n = len(ids)
    instances = np.asarray(expand_masked_instances(ids), dtype=np.int64)
    step = batch_size or n
    per_word = []
    for start in range(0, n, step):
        chunk = instances[start:start + step]
        log_probs = model.forward_batch(chunk).data
        for row in range(chunk.shape[0]):
            pos = start + row
            per_word.append((pos, tokens[pos],
                             float(log_probs[row, pos, ids[pos]])))
    return SentenceScore(sum(v for _, _, v in per_word), per_word, n, oov)


def score_unidirectional(model: LanguageModel, tokens,
                         vocab: C.Vocabulary) -> SentenceScore:
    """Sum over i of log p(w_i | <s>, w_1..w_{i-1}); no end-of-sentence term."""
    if model.config.mode != UNIDIRECTIONAL:
        raise ParameterError("score_unidirectional requires a unidirectional model")
    # input is <s> + first n-1 words, so n positions suffice
    tokens, ids, oov = _prepare(tokens, vocab, model.config.max_len)
    n = len(ids)
    inputs = np.asarray([C.BOS_ID] + ids[:-1], dtype=np.int64)
    log_probs = model.forward(inputs).data
    per_word = [(i, tokens[i], float(log_probs[i, ids[i]])) for i in range(n)]
    return SentenceScore(sum(v for _, _, v in per_word), per_word, n, oov)


def make_scorer(model: LanguageModel, vocab: C.Vocabulary):
    """A text -> SentenceScore callable dispatching on the model's mode."""
    if model.config.mode == BIDIRECTIONAL:
        return lambda text: score_bidirectional(model, C.tokenize(text), vocab)
    return lambda text: score_unidirectional(model, C.tokenize(text), vocab)
