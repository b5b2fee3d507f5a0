"""Minimal dense tensors with reverse-mode automatic differentiation."""
from .gradcheck import grad_check
from .ops import (
    add,
    as_tensor,
    bce_with_logits,
    broadcast_to,
    concat,
    gelu,
    getitem,
    layer_norm,
    linear,
    matmul,
    mean,
    mul,
    neg,
    reshape,
    scaled_dot_product_attention,
    softmax,
    sub,
    sum,
    swapaxes,
    transpose,
)
from .tensor import DEFAULT_DTYPE, TapeNode, Tensor, is_grad_enabled, no_grad

__all__ = [
    "DEFAULT_DTYPE",
    "TapeNode",
    "Tensor",
    "add",
    "as_tensor",
    "bce_with_logits",
    "broadcast_to",
    "concat",
    "gelu",
    "getitem",
    "grad_check",
    "is_grad_enabled",
    "layer_norm",
    "linear",
    "matmul",
    "mean",
    "mul",
    "neg",
    "no_grad",
    "reshape",
    "scaled_dot_product_attention",
    "softmax",
    "sub",
    "sum",
    "swapaxes",
    "transpose",
]
