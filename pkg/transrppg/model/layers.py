"""Image sequentialization, patch embedding and the pre-norm encoder layer."""
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..core.conf import ModelConfig
from ..exceptions import DimensionError, MapBuildError, NumericError
from ..mstmap.maps import MSTMap
from ..tensor import Tensor, ops
from .weights import LayerWeights, ModelWeights


@dataclass(frozen=True)
class PatchSequence:
    """Flattened overlapping patches, (..., N, P_H * P_W * C), row-major over the window grid."""

    patches: np.ndarray
    grid: Tuple[int, int]

    @property
    def count(self) -> int:
        return self.patches.shape[-2]

    @property
    def dim(self) -> int:
        return self.patches.shape[-1]


def token_grid(height: int, width: int, cfg: ModelConfig) -> Tuple[int, int]:
    n_h = (height - cfg.P_H + cfg.S_H) // cfg.S_H
    n_w = (width - cfg.P_W + cfg.S_W) // cfg.S_W
    return n_h, n_w


def sequentialize(values: Union[MSTMap, np.ndarray], cfg: ModelConfig) -> PatchSequence:
    """Slide a P_H x P_W window with steps S_H, S_W over (..., H, W, C) maps.

    Windows are ordered height-outer, each flattened in (row, column, channel) order.
    """
    if isinstance(values, MSTMap):
        if not values.normalized:
            raise MapBuildError("sequentialize expects a normalized map")
        values = values.values
    values = np.asarray(values)
    if values.ndim < 3:
        raise DimensionError("sequentialize (expected ..., H, W, C)", values.shape)
    height, width, channels = values.shape[-3:]
    if cfg.P_H > height or cfg.P_W > width:
        raise DimensionError("sequentialize (patch larger than map)", (cfg.P_H, cfg.P_W), (height, width))
    # (..., H', W', C, P_H, P_W) -> strided grid -> (..., N_H, N_W, P_H, P_W, C)
    windows = sliding_window_view(values, (cfg.P_H, cfg.P_W), axis=(-3, -2))
    windows = windows[..., :: cfg.S_H, :: cfg.S_W, :, :, :]
    lead = values.shape[:-3]
    n_h, n_w = windows.shape[-5], windows.shape[-4]
    order = tuple(range(len(lead))) + tuple(len(lead) + i for i in (0, 1, 3, 4, 2))
    patches = np.ascontiguousarray(windows.transpose(order)).reshape(lead + (n_h * n_w, cfg.P_H * cfg.P_W * channels))
    return PatchSequence(patches=patches, grid=(n_h, n_w))


def embed(patches: Union[PatchSequence, np.ndarray], branch: str, weights: ModelWeights) -> Tensor:
    """Z0 = [class token; patches E + b] + E_pos, batched over a leading axis.

    Without a class token nothing is prepended; without position embeddings
    nothing is added.
    """
    cfg = weights.config
    if isinstance(patches, PatchSequence):
        patches = patches.patches
    unbatched = patches.ndim == 2
    if unbatched:
        patches = patches[None]
    projection = weights["patch_embed.weight"]
    if patches.ndim != 3 or patches.shape[-1] != projection.shape[0]:
        raise DimensionError(f"embed ({branch})", patches.shape, projection.shape)

    batch = patches.shape[0]
    x = Tensor(patches, dtype=weights.dtype, copy=False)
    tokens = ops.linear(x, projection, weights["patch_embed.bias"])
    if cfg.use_class_token:
        cls = ops.broadcast_to(weights[f"{branch}.cls"][None], (batch, 1, cfg.D))
        tokens = ops.concat([cls, tokens], axis=1)
    if cfg.use_pos_embed:
        pos = weights[f"{branch}.pos"]
        if pos.shape[0] != tokens.shape[1]:
            raise DimensionError(f"embed ({branch} position embedding)", pos.shape, tokens.shape)
        tokens = tokens + pos
    return tokens[0] if unbatched else tokens


def multi_head_attention(y: Tensor, lw: LayerWeights, heads: int) -> Tuple[Tensor, np.ndarray]:
    """Concatenated heads of softmax(Q K^T / sqrt(d_head)) V, projected by U_MSA."""
    batch, tokens, d = y.shape
    head_dim = d // heads
    qkv = ops.matmul(y, lw.qkv).reshape(batch, tokens, 3, heads, head_dim)
    qkv = ops.transpose(qkv, (2, 0, 3, 1, 4))
    q, k, v = qkv[0], qkv[1], qkv[2]
    out, attention = ops.scaled_dot_product_attention(q, k, v, scale=1.0 / math.sqrt(head_dim))
    out = ops.transpose(out, (0, 2, 1, 3)).reshape(batch, tokens, d)
    return ops.linear(out, lw.proj_weight, lw.proj_bias), attention


def encoder_layer(
    z: Tensor, lw: LayerWeights, cfg: ModelConfig, layer_index: Union[int, str] = 0
) -> Tuple[Tensor, np.ndarray]:
    """Z' = MSA(LN(Z)) + Z; Z'' = MLP(LN(Z')) + Z'.

    Accepts (tokens, D) or (batch, tokens, D); returns the same shape and the
    attention maps (batch, heads, tokens, tokens).
    """
    unbatched = z.ndim == 2
    if unbatched:
        z = z[None]
    if z.ndim != 3 or z.shape[-1] != cfg.D:
        raise DimensionError(f"layer {layer_index}", z.shape, (cfg.D,))
    try:
        attended, attention = multi_head_attention(
            ops.layer_norm(z, lw.ln1_gain, lw.ln1_bias, cfg.ln_epsilon), lw, cfg.heads
        )
        z = z + attended
        hidden = ops.gelu(ops.linear(ops.layer_norm(z, lw.ln2_gain, lw.ln2_bias, cfg.ln_epsilon), lw.mlp1_weight, lw.mlp1_bias))
        z = z + ops.linear(hidden, lw.mlp2_weight, lw.mlp2_bias)
    except NumericError as e:
        raise NumericError(f"layer {layer_index} ({e.where})", e.detail) from e
    return (z[0], attention[0]) if unbatched else (z, attention)
