"""Two-branch shared-encoder transformer with hierarchical supervision."""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import special

from ..core.conf import ModelConfig
from ..exceptions import DimensionError, InvalidLabelError
from ..mstmap.traces import MASK
from ..tensor import Tensor, no_grad, ops
from ..utils.logging import get_logger
from .attention import AttentionRecord
from .layers import embed, encoder_layer, sequentialize
from .weights import ModelWeights, parameter_shapes

logger = get_logger(__name__)

# Published forward cost, compared against flop_count in logs only.
REFERENCE_FLOPS = 763_000_000


@dataclass
class ForwardOutput:
    """Per-sample logits of the three heads; `logit_bg` is None without a background branch."""

    logit_face: Tensor
    logit_bg: Optional[Tensor]
    logit_combined: Tensor
    attention: Optional[AttentionRecord] = None


@dataclass
class LossBreakdown:
    total: Tensor
    face: Tensor
    bg: Optional[Tensor]
    combined: Tensor

    def values(self) -> Dict[str, float]:
        return {
            "L_face": self.face.item(),
            "L_bg": float("nan") if self.bg is None else self.bg.item(),
            "L_combined": self.combined.item(),
            "L_overall": self.total.item(),
        }


def _as_batch(maps: np.ndarray, expected: tuple, what: str) -> np.ndarray:
    maps = np.asarray(maps)
    if maps.ndim == 3:
        maps = maps[None]
    if maps.ndim != 4 or maps.shape[1:] != expected:
        raise DimensionError(f"forward {what} maps", expected, maps.shape[1:] if maps.ndim == 4 else maps.shape)
    return maps


def _check_weights(weights: ModelWeights, cfg: ModelConfig) -> None:
    if cfg is weights.config:
        return
    expected = parameter_shapes(cfg)
    actual = {name: t.shape for name, t in weights.items()}
    if dict(expected) != actual:
        raise DimensionError("forward (config does not match weights)")


def _split_class_token(z: Tensor, cfg: ModelConfig):
    """(pooled feature, non-class tokens); pooling is the class token or the token mean."""
    if cfg.use_class_token:
        return z[:, 0], z[:, 1:]
    return ops.mean(z, axis=1), z


def forward(
    face_maps: np.ndarray,
    bg_maps: Optional[np.ndarray],
    weights: ModelWeights,
    cfg: Optional[ModelConfig] = None,
    record_attention: bool = False,
) -> ForwardOutput:
    """Run both branches through the shared encoder, fuse, and score.

    Maps are (H, W, C) or batched (B, H, W, C). The face and background
    branches share every encoder layer; their non-class tokens are joined
    behind the combined class token and passed through one fusion layer.
    """
    cfg = weights.config if cfg is None else cfg
    _check_weights(weights, cfg)

    face_maps = _as_batch(face_maps, (cfg.face_input_height, cfg.W, cfg.C), "face")
    if cfg.use_bg_branch:
        if bg_maps is None:
            raise DimensionError("forward (background maps required by the two-branch model)", face_maps.shape)
        bg_maps = _as_batch(bg_maps, (cfg.H_bg, cfg.W, cfg.C), "background")
        if bg_maps.shape[0] != face_maps.shape[0]:
            raise DimensionError("forward batch", face_maps.shape, bg_maps.shape)
    elif bg_maps is not None:
        raise DimensionError(f"forward (bg_mode={cfg.bg_mode} takes no background maps)", np.shape(bg_maps))
    batch = face_maps.shape[0]

    face_seq = sequentialize(face_maps, cfg)
    branches = {"face": embed(face_seq, "face", weights)}
    grids = {"face": face_seq.grid}
    if cfg.use_bg_branch:
        bg_seq = sequentialize(bg_maps, cfg)
        branches["bg"] = embed(bg_seq, "bg", weights)
        grids["bg"] = bg_seq.grid

    maps: Dict[str, List[np.ndarray]] = {name: [] for name in branches}
    for index, lw in enumerate(weights.encoder_layers()):
        for name in branches:
            branches[name], attention = encoder_layer(branches[name], lw, cfg, layer_index=index)
            if record_attention:
                maps[name].append(attention)

    pooled = {}
    tokens = []
    for name, z in branches.items():
        pooled[name], rest = _split_class_token(z, cfg)
        tokens.append(rest)
    if cfg.use_class_token:
        tokens.insert(0, ops.broadcast_to(weights["combined.cls"][None], (batch, 1, cfg.D)))
    fused, fusion_attention = encoder_layer(ops.concat(tokens, axis=1), weights.fusion_layer(), cfg, "fusion")
    pooled["combined"], _ = _split_class_token(fused, cfg)

    logits = {
        name: ops.linear(feature, weights[f"head_{name}.weight"], weights[f"head_{name}.bias"]).reshape(batch)
        for name, feature in pooled.items()
    }
    record = None
    if record_attention:
        record = AttentionRecord(
            face=maps["face"],
            bg=maps.get("bg", []),
            fusion=fusion_attention,
            face_grid=grids["face"],
            bg_grid=grids.get("bg"),
            class_token=cfg.use_class_token,
        )
    return ForwardOutput(
        logit_face=logits["face"],
        logit_bg=logits.get("bg"),
        logit_combined=logits["combined"],
        attention=record,
    )


def _check_labels(labels: Union[int, Sequence[int], np.ndarray], batch: int) -> np.ndarray:
    labels = np.atleast_1d(np.asarray(labels))
    if labels.shape != (batch,):
        raise DimensionError("hierarchical_loss labels", (batch,), labels.shape)
    if not np.isin(labels, (0, 1)).all():
        raise InvalidLabelError(f"labels must be 0 (mask) or 1 (bonafide), got {sorted(set(labels.tolist()))}")
    return labels


def hierarchical_loss(
    out: ForwardOutput, labels: Union[int, Sequence[int], np.ndarray], cfg: ModelConfig
) -> LossBreakdown:
    """L_face + L_bg + L_combined, each a batch-mean BCE.

    The background head always targets the mask class. Without auxiliary
    losses the total is L_combined alone; the other terms are still reported.
    """
    batch = out.logit_combined.shape[0]
    labels = _check_labels(labels, batch)
    if cfg.use_bg_branch and out.logit_bg is None:
        raise DimensionError("hierarchical_loss (background logit missing for a two-branch model)")

    face = ops.mean(ops.bce_with_logits(out.logit_face, labels))
    combined = ops.mean(ops.bce_with_logits(out.logit_combined, labels))
    bg = None
    if out.logit_bg is not None:
        bg = ops.mean(ops.bce_with_logits(out.logit_bg, np.full(batch, MASK)))

    if not cfg.aux_losses:
        total = combined
    elif bg is None:
        total = face + combined
    else:
        total = face + bg + combined
    return LossBreakdown(total=total, face=face, bg=bg, combined=combined)


def predict_scores(
    face_maps: np.ndarray,
    bg_maps: Optional[np.ndarray],
    weights: ModelWeights,
    batch_size: int = 8,
) -> np.ndarray:
    """Liveness scores sigmoid(logit_combined), computed without recording a graph."""
    face_maps = np.asarray(face_maps)
    if face_maps.ndim == 3:
        face_maps = face_maps[None]
        bg_maps = None if bg_maps is None else np.asarray(bg_maps)[None]
    scores = []
    with no_grad():
        for start in range(0, face_maps.shape[0], batch_size):
            stop = start + batch_size
            bg = None if bg_maps is None else bg_maps[start:stop]
            out = forward(face_maps[start:stop], bg, weights)
            scores.append(special.expit(out.logit_combined.data.astype(np.float64)))
    return np.concatenate(scores) if scores else np.zeros(0)


@dataclass(frozen=True)
class FlopCount:
    """Forward-pass cost at 2*m*k*n per (m x k)(k x n) product."""

    groups: Dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.groups.values())

    def lines(self) -> List[str]:
        rows = [f"{group}={count}" for group, count in self.groups.items()]
        rows.append(f"total={self.total}")
        return rows


def _layer_flops(tokens: int, cfg: ModelConfig) -> Dict[str, int]:
    d, hidden = cfg.D, cfg.D * cfg.mlp_ratio
    return {
        "qkv": 2 * tokens * d * 3 * d,
        # Q K^T and A V over all heads: h * (T x d_head)(d_head x T) and h * (T x T)(T x d_head).
        "attention": 2 * 2 * tokens * tokens * d,
        "proj": 2 * tokens * d * d,
        "mlp": 2 * tokens * d * hidden * 2,
    }


def flop_count(cfg: ModelConfig) -> FlopCount:
    """Analytic multiply-add count of one forward pass; biases, norms and softmax are ignored.

    With `layers=0` only the patch embedding is counted.
    """
    cfg.validate()
    extra = 1 if cfg.use_class_token else 0
    branch_tokens = [cfg.n_face_tokens] + ([cfg.n_bg_tokens] if cfg.use_bg_branch else [])
    groups = {"patch_embed": sum(2 * n * cfg.patch_dim * cfg.D for n in branch_tokens)}

    encoder = {"qkv": 0, "attention": 0, "proj": 0, "mlp": 0}
    for n in branch_tokens:
        for key, value in _layer_flops(n + extra, cfg).items():
            encoder[key] += cfg.layers * value
    for key, value in encoder.items():
        groups[f"encoder_{key}"] = value

    if cfg.layers:
        groups["fusion"] = sum(_layer_flops(sum(branch_tokens) + extra, cfg).values())
        groups["heads"] = 2 * cfg.D * (len(branch_tokens) + 1)
    else:
        groups["fusion"] = groups["heads"] = 0
    count = FlopCount(groups=groups)
    logger.debug(f"📊 Forward cost {count.total:,} FLOPs (published figure {REFERENCE_FLOPS:,})")
    return count
