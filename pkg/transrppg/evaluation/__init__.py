"""PAD metrics and evaluation protocols."""
from .metrics import (
    MetricsReport,
    ScoredSet,
    eer,
    evaluate,
    ffr_at_flr,
    hter,
    operating_points,
    roc_auc,
    roc_auc_trapezoid,
)
from .protocols import (
    AXES,
    AXIS_DEFAULTS,
    AblationRow,
    CrossResult,
    FoldResult,
    LosoResult,
    ablation_sweep,
    cross_run,
    fold_summary,
    loso_run,
    score,
    variant_config,
    write_ablation_csv,
)

__all__ = [
    "AXES",
    "AXIS_DEFAULTS",
    "AblationRow",
    "CrossResult",
    "FoldResult",
    "LosoResult",
    "MetricsReport",
    "ScoredSet",
    "ablation_sweep",
    "cross_run",
    "eer",
    "evaluate",
    "ffr_at_flr",
    "fold_summary",
    "hter",
    "loso_run",
    "operating_points",
    "roc_auc",
    "roc_auc_trapezoid",
    "score",
    "variant_config",
    "write_ablation_csv",
]
