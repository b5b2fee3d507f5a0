"""TransRPPG model: sequentialization, shared encoder, fusion and heads."""
from .attention import AttentionRecord, export_attention
from .layers import PatchSequence, embed, encoder_layer, sequentialize, token_grid
from .transrppg import (
    FlopCount,
    ForwardOutput,
    LossBreakdown,
    flop_count,
    forward,
    hierarchical_loss,
    predict_scores,
)
from .weights import (
    LayerWeights,
    ModelWeights,
    ParamCount,
    init_weights,
    load_weights,
    param_count,
    parameter_shapes,
    save_weights,
)

__all__ = [
    "AttentionRecord",
    "FlopCount",
    "ForwardOutput",
    "LayerWeights",
    "LossBreakdown",
    "ModelWeights",
    "ParamCount",
    "PatchSequence",
    "embed",
    "encoder_layer",
    "export_attention",
    "flop_count",
    "forward",
    "hierarchical_loss",
    "init_weights",
    "load_weights",
    "param_count",
    "parameter_shapes",
    "predict_scores",
    "save_weights",
    "sequentialize",
    "token_grid",
]
