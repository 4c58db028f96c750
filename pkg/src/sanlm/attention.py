"""Self-attention building blocks.

Scaled dot-product attention, per-head projections, an optional causal
mask, and the full post-norm layer (attention sublayer + position-wise
feed-forward sublayer, each with residual, dropout, and layer norm).
Masks are additive -inf on pre-softmax logits, which makes the weight on
every forbidden position exactly zero after the softmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import DimensionError, ParameterError
from .rng import RngState
from .tensor import Parameter, Tensor

LAYER_NORM_EPS = 1e-6


@dataclass(frozen=True)
class AttentionConfig:
    model_dim: int
    num_heads: int
    ffn_dim: int
    dropout_p: float = 0.1

    def __post_init__(self):
        if self.model_dim < 1 or self.num_heads < 1 or self.ffn_dim < 1:
            raise ParameterError("attention dimensions must be positive")
        if self.model_dim % self.num_heads != 0:
            raise ParameterError(
                f"model_dim {self.model_dim} not divisible by "
                f"num_heads {self.num_heads}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ParameterError("dropout_p must be in [0, 1)")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.num_heads


@dataclass
class SanLayerParams:
    """Weights of one self-attention layer; one Q/K/V projection per head."""

    wq: list[Parameter] = field(default_factory=list)  # h of [d, d_k]
    wk: list[Parameter] = field(default_factory=list)
    wv: list[Parameter] = field(default_factory=list)
    wo: Parameter = None                               # [h*d_k, d]
    w1: Parameter = None                               # [d, ffn_dim]
    b1: Parameter = None
    w2: Parameter = None                               # [ffn_dim, d]
    b2: Parameter = None
    ln1_gain: Parameter = None
    ln1_bias: Parameter = None
    ln2_gain: Parameter = None
    ln2_bias: Parameter = None

    @classmethod
    def create(cls, config: AttentionConfig, rng: RngState, prefix: str,
               init_std: float = 0.02, dtype=np.float64) -> "SanLayerParams":
        d, dk, ffn = config.model_dim, config.head_dim, config.ffn_dim

        def w(name, shape):
            return Parameter(rng.truncated_normal(shape, init_std), f"{prefix}.{name}", dtype)

        def zeros(name, shape):
            return Parameter(np.zeros(shape), f"{prefix}.{name}", dtype)

        return cls(
            wq=[w(f"wq{i}", (d, dk)) for i in range(config.num_heads)],
            wk=[w(f"wk{i}", (d, dk)) for i in range(config.num_heads)],
            wv=[w(f"wv{i}", (d, dk)) for i in range(config.num_heads)],
            wo=w("wo", (dk * config.num_heads, d)),
            w1=w("w1", (d, ffn)),
            b1=zeros("b1", (ffn,)),
            w2=w("w2", (ffn, d)),
            b2=zeros("b2", (d,)),
            ln1_gain=Parameter(np.ones(d), f"{prefix}.ln1_gain", dtype),
            ln1_bias=zeros("ln1_bias", (d,)),
            ln2_gain=Parameter(np.ones(d), f"{prefix}.ln2_gain", dtype),
            ln2_bias=zeros("ln2_bias", (d,)),
        )

    def parameters(self) -> list[Parameter]:
        return [*self.wq, *self.wk, *self.wv, self.wo,
                self.w1, self.b1, self.w2, self.b2,
                self.ln1_gain, self.ln1_bias, self.ln2_gain, self.ln2_bias]


def causal_mask(n: int) -> np.ndarray:
    """Additive [n, n] mask: -inf above the diagonal, 0 elsewhere."""
    if n < 1:
        raise ParameterError(f"causal_mask requires n >= 1, got {n}")
    mask = np.zeros((n, n))
    mask[np.triu_indices(n, k=1)] = T.NEG_INF
    return mask


def scaled_dot_attention(q, k, v, mask: np.ndarray | None = None,
                         return_weights: bool = False):
    """Softmax(q kᵀ / sqrt(d_k)) v with an optional additive logit mask."""
    q, k, v = T.as_tensor(q), T.as_tensor(k), T.as_tensor(v)
    if q.shape[-2] != k.shape[-2] or k.shape[-2] != v.shape[-2]:
        raise DimensionError(
            f"attention sequence lengths differ: q {q.shape}, k {k.shape}, "
            f"v {v.shape}")
    dk = q.shape[-1]
    logits = T.scale(T.matmul(q, T.transpose_last(k)), 1.0 / np.sqrt(dk))
    if mask is not None:
        logits = T.add_mask(logits, mask)
    weights = T.softmax_rows(logits)
    out = T.matmul(weights, v)
    if return_weights:
        return out, weights
    return out


def multi_head(x, params: SanLayerParams, mask: np.ndarray | None = None) -> Tensor:
    """Concat of per-head attentions over projected inputs, then W^O."""
    heads = []
    for wq, wk, wv in zip(params.wq, params.wk, params.wv):
        q = T.matmul(x, wq)
        k = T.matmul(x, wk)
        v = T.matmul(x, wv)
        heads.append(scaled_dot_attention(q, k, v, mask))
    return T.matmul(T.concat_last(heads), params.wo)


def ffn(x, params: SanLayerParams) -> Tensor:
    hidden = T.gelu(T.add(T.matmul(x, params.w1), params.b1))
    return T.add(T.matmul(hidden, params.w2), params.b2)


def san_layer(x, params: SanLayerParams, dropout_p: float = 0.0,
              mask: np.ndarray | None = None, rng: RngState | None = None,
              training: bool = False) -> Tensor:
    """Post-norm layer: LN(x + Drop(MH(x))), then LN(u + Drop(FFN(u)))."""
    attended = T.dropout(multi_head(x, params, mask), dropout_p, rng, training)
    u = T.layer_norm(T.add(x, attended), params.ln1_gain, params.ln1_bias,
                     LAYER_NORM_EPS)
    transformed = T.dropout(ffn(u, params), dropout_p, rng, training)
    return T.layer_norm(T.add(u, transformed), params.ln2_gain, params.ln2_bias,
                        LAYER_NORM_EPS)
