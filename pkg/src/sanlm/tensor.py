"""Dense tensors with reverse-mode automatic differentiation.

The graph is define-by-run: every operation returns a new Tensor holding
its result, its parents, and a closure that routes the output gradient
back to the parents. Gradients accumulate additively, so a parameter used
in several places (e.g. a tied embedding / softmax matrix) receives the
sum of all path gradients. All math is float64 by default; float32 is
available by constructing parameters with dtype=np.float32.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .errors import DimensionError, ParameterError
from .rng import RngState

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

NEG_INF = -np.inf


class Tensor:
    """A numpy-backed node in the computation graph."""

    __slots__ = ("data", "grad", "_parents", "_backward_fn")

    def __init__(self, data, _parents=(), _backward_fn=None):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self._parents = _parents
        self._backward_fn = _backward_fn

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


class Parameter(Tensor):
    """A named trainable leaf tensor with a preallocated gradient buffer."""

    __slots__ = ("name",)

    def __init__(self, data, name: str, dtype=np.float64):
        super().__init__(np.array(data, dtype=dtype))
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self):
        self.grad.fill(0.0)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to the original shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _accum(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype)
    else:
        t.grad += g


# ---------------------------------------------------------------------------
# Primitive operations
# ---------------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    """Matrix product; batched over leading axes like numpy matmul."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(
            f"matmul: incompatible shapes {a.shape} x {b.shape}")
    out = a.data @ b.data

    def _bw(g):
        _accum(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        _accum(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return Tensor(out, (a, b), _bw)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def _bw(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return Tensor(out, (a, b), _bw)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def _bw(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return Tensor(out, (a, b), _bw)


def scale(a, s: float) -> Tensor:
    a = as_tensor(a)
    return Tensor(a.data * s, (a,), lambda g: _accum(a, g * s))


def add_mask(a, mask: np.ndarray) -> Tensor:
    """Add a constant (non-differentiable) additive mask, e.g. -inf logits."""
    a = as_tensor(a)
    return Tensor(a.data + mask, (a,), lambda g: _accum(a, _unbroadcast(g, a.shape)))


def transpose_last(a) -> Tensor:
    a = as_tensor(a)
    out = np.swapaxes(a.data, -1, -2)
    return Tensor(out, (a,), lambda g: _accum(a, np.swapaxes(g, -1, -2)))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    orig = a.shape
    return Tensor(a.data.reshape(shape), (a,),
                  lambda g: _accum(a, g.reshape(orig)))


def concat_last(parts) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=-1)
    widths = [p.shape[-1] for p in parts]

    def _bw(g):
        start = 0
        for p, w in zip(parts, widths):
            _accum(p, g[..., start:start + w])
            start += w

    return Tensor(out, tuple(parts), _bw)


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(np.asarray(a.data.sum()), (a,),
                  lambda g: _accum(a, np.broadcast_to(g, a.shape).copy()))


def softmax_rows(x) -> Tensor:
    """Row-stabilized softmax along the last axis.

    -inf logits produce exactly zero weights, so additive masks fully
    exclude forbidden positions.
    """
    x = as_tensor(x)
    m = np.max(x.data, axis=-1, keepdims=True)
    e = np.exp(x.data - m)
    s = e / e.sum(axis=-1, keepdims=True)

    def _bw(g):
        _accum(x, s * (g - (g * s).sum(axis=-1, keepdims=True)))

    return Tensor(s, (x,), _bw)


def log_softmax_rows(x) -> Tensor:
    """Log-softmax along the last axis (each row log-sum-exps to 0)."""
    x = as_tensor(x)
    m = np.max(x.data, axis=-1, keepdims=True)
    shifted = x.data - m
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse
    soft = np.exp(out)

    def _bw(g):
        _accum(x, g - soft * g.sum(axis=-1, keepdims=True))

    return Tensor(out, (x,), _bw)


def layer_norm(x, gain, bias, eps: float = 1e-6) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    if x.shape[-1] < 1:
        raise DimensionError("layer_norm: last axis must be non-empty")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = xhat * gain.data + bias.data

    def _bw(g):
        gg = g * gain.data
        gx = inv * (gg - gg.mean(axis=-1, keepdims=True)
                    - xhat * (gg * xhat).mean(axis=-1, keepdims=True))
        _accum(x, gx)
        red = tuple(range(g.ndim - 1))
        _accum(gain, (g * xhat).sum(axis=red))
        _accum(bias, g.sum(axis=red))

    return Tensor(out, (x, gain, bias), _bw)


def gelu(x) -> Tensor:
    """Exact gelu: x * Phi(x) with Phi the standard normal CDF (erf form)."""
    x = as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    out = x.data * cdf
    pdf = np.exp(-0.5 * x.data * x.data) * _INV_SQRT_2PI

    def _bw(g):
        _accum(x, g * (cdf + x.data * pdf))

    return Tensor(out, (x,), _bw)


def dropout(x, p: float, rng: RngState | None, training: bool) -> Tensor:
    """Inverted dropout: survivors scaled by 1/(1-p); inference is identity."""
    if not 0.0 <= p < 1.0:
        raise ParameterError(f"dropout probability must be in [0, 1), got {p}")
    x = as_tensor(x)
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ParameterError("dropout in training mode requires an RngState")
    keep = (rng.uniform(x.shape) >= p) / (1.0 - p)
    return Tensor(x.data * keep, (x,), lambda g: _accum(x, g * keep))


def embedding(table, ids) -> Tensor:
    """Row lookup into an embedding table; gradient scatter-adds by id."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    out = table.data[ids]

    def _bw(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.shape[-1]))
        _accum(table, gt)

    return Tensor(out, (table,), _bw)


def cross_entropy(log_probs, targets, mask) -> Tensor:
    """Mean negative log-likelihood over mask-selected positions.

    log_probs: [..., V] already-normalized log-distributions;
    targets: integer ids, shaped like log_probs minus the last axis;
    mask: booleans of the same shape as targets.
    """
    log_probs = as_tensor(log_probs)
    targets = np.asarray(targets, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    if targets.shape != log_probs.shape[:-1] or mask.shape != targets.shape:
        raise DimensionError(
            f"cross_entropy: targets {targets.shape} / mask {mask.shape} "
            f"do not match log_probs {log_probs.shape}")
    n_active = int(mask.sum())
    if n_active == 0:
        raise ParameterError("cross_entropy: mask selects no positions")
    vocab = log_probs.shape[-1]
    if (targets[mask] < 0).any() or (targets[mask] >= vocab).any():
        raise ParameterError("cross_entropy: target id outside vocabulary")
    safe = np.where(mask, targets, 0)
    picked = np.take_along_axis(log_probs.data, safe[..., None], axis=-1)[..., 0]
    loss = -(picked * mask).sum() / n_active

    def _bw(g):
        glp = np.zeros_like(log_probs.data)
        contrib = np.where(mask, -g / n_active, 0.0)
        np.put_along_axis(glp, safe[..., None], contrib[..., None], axis=-1)
        _accum(log_probs, glp)

    return Tensor(np.asarray(loss), (log_probs,), _bw)


# ---------------------------------------------------------------------------
# Backward pass
# ---------------------------------------------------------------------------

def backward(loss: Tensor):
    """Populate gradients of everything reachable from a scalar loss."""
    if loss.data.size != 1:
        raise DimensionError(
            f"backward requires a scalar, got shape {loss.shape}")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    _accum(loss, np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)
