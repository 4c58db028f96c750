"""The full self-attention language model.

Token + position embeddings feed a stack of SAN layers; the output head
reuses the embedding table (weight tying by identity) plus a separate
bias, producing normalized log-probabilities over the vocabulary. The
unidirectional variant applies a causal mask in every layer; the
bidirectional variant attends freely and is trained on masked words.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .attention import AttentionConfig, SanLayerParams, causal_mask, san_layer
from .corpus import Batch
from .errors import (DataError, ParameterError, SequenceTooLongError,
                     VocabularyError)
from .rng import RngState
from .tensor import Parameter, Tensor

BIDIRECTIONAL = "bidirectional"
UNIDIRECTIONAL = "unidirectional"

INIT_STD = 0.02


@dataclass(frozen=True)
class ModelConfig:
    mode: str
    vocab_size: int
    num_layers: int = 3
    model_dim: int = 512
    num_heads: int = 8
    ffn_dim: int = 2048
    max_len: int = 128
    dropout_p: float = 0.1
    dtype: str = "float64"

    def __post_init__(self):
        if self.mode not in (BIDIRECTIONAL, UNIDIRECTIONAL):
            raise ParameterError(f"unknown model mode {self.mode!r}")
        if self.max_len < 1 or self.num_layers < 1 or self.vocab_size < 1:
            raise ParameterError("max_len, num_layers, vocab_size must be >= 1")
        if self.dtype not in ("float64", "float32"):
            raise ParameterError("dtype must be float64 or float32")
        # divisibility and range checks delegated to AttentionConfig
        self.attention()

    def attention(self) -> AttentionConfig:
        return AttentionConfig(self.model_dim, self.num_heads,
                               self.ffn_dim, self.dropout_p)

    @property
    def np_dtype(self):
        return np.float64 if self.dtype == "float64" else np.float32

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "vocab_size": self.vocab_size,
            "num_layers": self.num_layers, "model_dim": self.model_dim,
            "num_heads": self.num_heads, "ffn_dim": self.ffn_dim,
            "max_len": self.max_len, "dropout_p": self.dropout_p,
            "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class LmParams:
    embedding: Parameter          # [V, d]; also the (tied) output projection
    positions: Parameter          # [max_len, d]
    layers: list[SanLayerParams]
    softmax_bias: Parameter       # [V]

    @classmethod
    def create(cls, config: ModelConfig, rng: RngState) -> "LmParams":
        d, dt = config.model_dim, config.np_dtype
        att = config.attention()
        return cls(
            embedding=Parameter(
                rng.truncated_normal((config.vocab_size, d), INIT_STD),
                "embedding", dt),
            positions=Parameter(
                rng.truncated_normal((config.max_len, d), INIT_STD),
                "positions", dt),
            layers=[SanLayerParams.create(att, rng, f"layer{i}", INIT_STD, dt)
                    for i in range(config.num_layers)],
            softmax_bias=Parameter(np.zeros(config.vocab_size),
                                   "softmax_bias", dt),
        )

    @classmethod
    def zeros(cls, config: ModelConfig) -> "LmParams":
        params = cls.create(config, RngState(0))
        for p in params.parameters():
            p.data.fill(0.0)
        return params

    def parameters(self) -> list[Parameter]:
        out = [self.embedding, self.positions]
        for layer in self.layers:
            out.extend(layer.parameters())
        out.append(self.softmax_bias)
        return out


class LanguageModel:
    """A SANLM in one of the two modes, with tied input/output embeddings."""

    def __init__(self, config: ModelConfig, params: LmParams):
        self.config = config
        self.params = params

    @classmethod
    def create(cls, config: ModelConfig, rng: RngState) -> "LanguageModel":
        return cls(config, LmParams.create(config, rng))

    @classmethod
    def zeros(cls, config: ModelConfig) -> "LanguageModel":
        return cls(config, LmParams.zeros(config))

    def parameters(self) -> list[Parameter]:
        return self.params.parameters()

    # -- forward ------------------------------------------------------------

    def _check_ids(self, ids: np.ndarray, n: int):
        if n > self.config.max_len:
            raise SequenceTooLongError(
                f"sequence length {n} exceeds max_len {self.config.max_len}")
        if n < 1:
            raise DataError("cannot run the model on an empty sequence")
        if (ids < 0).any() or (ids >= self.config.vocab_size).any():
            raise VocabularyError("token id outside the vocabulary")

    def embed(self, token_ids) -> Tensor:
        """X = embedding rows + position rows 0..n-1, for one sequence."""
        ids = np.asarray(token_ids, dtype=np.int64)
        self._check_ids(ids, ids.shape[-1])
        tok = T.embedding(self.params.embedding, ids)
        pos = T.embedding(self.params.positions,
                          np.arange(ids.shape[-1], dtype=np.int64))
        return T.add(tok, pos)

    def _attention_mask(self, valid: np.ndarray | None, n: int) -> np.ndarray | None:
        """Additive [_, n, n] mask combining causality and key padding."""
        mask = None
        if self.config.mode == UNIDIRECTIONAL:
            mask = causal_mask(n)
        if valid is not None and not valid.all():
            key_pad = np.where(valid[:, None, :], 0.0, T.NEG_INF)
            mask = key_pad if mask is None else mask + key_pad
        return mask

    def forward_batch(self, inputs: np.ndarray, valid: np.ndarray | None = None,
                      training: bool = False, rng: RngState | None = None) -> Tensor:
        """Log-probabilities [B, n, V] for padded input ids [B, n]."""
        inputs = np.asarray(inputs, dtype=np.int64)
        n = inputs.shape[-1]
        self._check_ids(inputs, n)
        x = self.embed(inputs)
        mask = self._attention_mask(valid, n)
        for layer in self.params.layers:
            x = san_layer(x, layer, self.config.dropout_p, mask, rng, training)
        logits = T.add(T.matmul(x, T.transpose_last(self.params.embedding)),
                       self.params.softmax_bias)
        return T.log_softmax_rows(logits)

    def forward(self, token_ids, training: bool = False,
                rng: RngState | None = None) -> Tensor:
        """Log-probabilities [n, V] for a single unpadded sequence."""
        ids = np.asarray(token_ids, dtype=np.int64)
        if ids.ndim != 1:
            raise ParameterError("forward expects a 1-D id sequence")
        out = self.forward_batch(ids[None, :], None, training, rng)
        return T.reshape(out, out.shape[1:])

    # -- losses ---------------------------------------------------------------

    def _batch_loss(self, batch: Batch, training: bool,
                    rng: RngState | None) -> Tensor:
        log_probs = self.forward_batch(batch.inputs, batch.valid, training, rng)
        return T.cross_entropy(log_probs, np.where(batch.label_mask, batch.labels, 0),
                               batch.label_mask)

    def mlm_loss(self, batch: Batch, training: bool = False,
                 rng: RngState | None = None) -> Tensor:
        """Mean -log p(original word) over the batch's masked positions."""
        if self.config.mode != BIDIRECTIONAL:
            raise ParameterError("mlm_loss requires a bidirectional model")
        if batch.mode != BIDIRECTIONAL:
            raise DataError("mlm_loss requires masked instances")
        if not batch.label_mask.any(axis=1).all():
            raise DataError("every instance must have at least one mask")
        return self._batch_loss(batch, training, rng)

    def next_word_loss(self, batch: Batch, training: bool = False,
                       rng: RngState | None = None) -> Tensor:
        """Mean -log p(next word) over all real positions in the batch."""
        if self.config.mode != UNIDIRECTIONAL:
            raise ParameterError("next_word_loss requires a unidirectional model")
        if batch.mode != UNIDIRECTIONAL:
            raise DataError("next_word_loss requires shifted instances")
        if not batch.label_mask.any(axis=1).all():
            raise DataError("every instance must supervise at least one position")
        return self._batch_loss(batch, training, rng)
