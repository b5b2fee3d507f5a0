"""Differentiable operations on Tensor."""
import math
from typing import Any, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from ..exceptions import DimensionError
from .tensor import Tensor

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def as_tensor(value: Any, like: Optional[Tensor] = None) -> Tensor:
    """Wrap constants as non-differentiable tensors of the reference dtype."""
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype), dtype=dtype)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast adjoint back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(op, a.shape, b.shape)


# --- elementwise ---
def add(a: Any, b: Any) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape("add", a, b)

    def backward(g: np.ndarray):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return Tensor.from_op("add", a.data + b.data, (a, b), backward)


def sub(a: Any, b: Any) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape("sub", a, b)

    def backward(g: np.ndarray):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return Tensor.from_op("sub", a.data - b.data, (a, b), backward)


def mul(a: Any, b: Any) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape("mul", a, b)

    def backward(g: np.ndarray):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return Tensor.from_op("mul", a.data * b.data, (a, b), backward)


def neg(x: Tensor) -> Tensor:
    return Tensor.from_op("neg", -x.data, (x,), lambda g: (-g,))


def _pair(a: Any, b: Any) -> Tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


# --- linear algebra ---
def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError("matmul", a.shape, b.shape)
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError("matmul", a.shape, b.shape)

    def backward(g: np.ndarray):
        da = g @ np.swapaxes(b.data, -1, -2) if a.requires_grad else None
        db = np.swapaxes(a.data, -1, -2) @ g if b.requires_grad else None
        return (
            None if da is None else unbroadcast(da, a.shape),
            None if db is None else unbroadcast(db, b.shape),
        )

    return Tensor.from_op("matmul", a.data @ b.data, (a, b), backward)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    out = matmul(x, weight)
    return out if bias is None else add(out, bias)


# --- structural ---
def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError:
        raise DimensionError("reshape", x.shape, tuple(shape))
    return Tensor.from_op("reshape", out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    axes = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return Tensor.from_op("transpose", np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def swapaxes(x: Tensor, axis1: int, axis2: int) -> Tensor:
    axes = list(range(x.ndim))
    axes[axis1], axes[axis2] = axes[axis2], axes[axis1]
    return transpose(x, axes)


def getitem(x: Tensor, index: Any) -> Tensor:
    out = np.array(x.data[index])

    def backward(g: np.ndarray):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)

    return Tensor.from_op("getitem", out, (x,), backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise DimensionError("concat (no inputs)")
    reference = tensors[0]
    axis = axis % reference.ndim
    for t in tensors[1:]:
        if t.ndim != reference.ndim or any(
            t.shape[d] != reference.shape[d] for d in range(reference.ndim) if d != axis
        ):
            raise DimensionError("concat", *(t.shape for t in tensors))
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g: np.ndarray):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor.from_op(
        "concat", np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward
    )


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    try:
        out = np.broadcast_to(x.data, shape).copy()
    except ValueError:
        raise DimensionError("broadcast_to", x.shape, shape)
    return Tensor.from_op("broadcast_to", out, (x,), lambda g: (unbroadcast(g, x.shape),))


# --- reductions ---
def sum(x: Tensor, axis: Any = None, keepdims: bool = False) -> Tensor:
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def backward(g: np.ndarray):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return Tensor.from_op("sum", np.asarray(out, dtype=x.dtype), (x,), backward)


def mean(x: Tensor, axis: Any = None, keepdims: bool = False) -> Tensor:
    count = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


# --- nonlinearities ---
def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-subtracted softmax along `axis`."""
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g: np.ndarray):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return Tensor.from_op("softmax", y, (x,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, epsilon: float = 1e-6) -> Tensor:
    """Normalize over the last axis, then scale by `gain` and shift by `bias`."""
    if gain.shape != (x.shape[-1],) or bias.shape != (x.shape[-1],):
        raise DimensionError("layer_norm", x.shape, gain.shape, bias.shape)
    mu = np.mean(x.data, axis=-1, keepdims=True)
    centered = x.data - mu
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + epsilon)
    xhat = centered * rstd
    out = xhat * gain.data + bias.data

    def backward(g: np.ndarray):
        lead = tuple(range(g.ndim - 1))
        dgain = np.sum(g * xhat, axis=lead) if gain.requires_grad else None
        dbias = np.sum(g, axis=lead) if bias.requires_grad else None
        dx = None
        if x.requires_grad:
            dxhat = g * gain.data
            dx = rstd * (
                dxhat
                - np.mean(dxhat, axis=-1, keepdims=True)
                - xhat * np.mean(dxhat * xhat, axis=-1, keepdims=True)
            )
        return dx, dgain, dbias

    return Tensor.from_op("layer_norm", out.astype(x.dtype, copy=False), (x, gain, bias), backward)


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, x * Phi(x)."""
    cdf = special.ndtr(x.data)

    def backward(g: np.ndarray):
        pdf = np.exp(-0.5 * x.data * x.data) * _INV_SQRT_2PI
        return (g * (cdf + x.data * pdf),)

    return Tensor.from_op("gelu", (x.data * cdf).astype(x.dtype, copy=False), (x,), backward)


def bce_with_logits(logits: Tensor, labels: Any) -> Tensor:
    """Elementwise binary cross-entropy on logits, max(z,0) - z*y + log(1+exp(-|z|))."""
    z = logits.data
    y = np.broadcast_to(np.asarray(labels, dtype=logits.dtype), z.shape)
    loss = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))

    def backward(g: np.ndarray):
        return (g * (special.expit(z) - y),)

    return Tensor.from_op("bce_with_logits", loss.astype(logits.dtype, copy=False), (logits,), backward)


def scaled_dot_product_attention(
    q: Tensor, k: Tensor, v: Tensor, scale: float
) -> Tuple[Tensor, np.ndarray]:
    """softmax(q k^T * scale) v over the last two axes.

    Returns the output and the attention matrix; only the attention matrix is
    kept for the backward pass.
    """
    if q.shape != k.shape or k.shape[:-1] != v.shape[:-1]:
        raise DimensionError("scaled_dot_product_attention", q.shape, k.shape, v.shape)
    scores = (q.data @ np.swapaxes(k.data, -1, -2)) * q.dtype.type(scale)
    scores -= np.max(scores, axis=-1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= np.sum(scores, axis=-1, keepdims=True)
    attn = scores

    def backward(g: np.ndarray):
        dv = np.swapaxes(attn, -1, -2) @ g
        da = g @ np.swapaxes(v.data, -1, -2)
        ds = attn * (da - np.sum(da * attn, axis=-1, keepdims=True))
        ds *= q.dtype.type(scale)
        dq = ds @ k.data
        dk = np.swapaxes(ds, -1, -2) @ q.data
        return dq, dk, dv

    out = Tensor.from_op("attention", attn @ v.data, (q, k, v), backward)
    return out, attn
