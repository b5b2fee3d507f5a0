"""Leave-one-subject-out, cross-population and ablation protocols."""
import copy
import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.conf import RunConfig
from ..exceptions import ConfigurationError, ProtocolError
from ..mstmap.pipeline import SamplePair, background_only, background_only_config, prepare_dataset
from ..mstmap.traces import RegionTraceSet
from ..model.transrppg import predict_scores
from ..model.weights import ModelWeights, init_weights
from ..training.trainer import TrainLog, Trainer, stack_pairs
from ..utils.logging import get_logger, log_execution
from .metrics import MetricsReport, ScoredSet, eer, error_rates, evaluate

logger = get_logger(__name__)

# Used when the training pool lacks a class and no EER threshold exists.
FALLBACK_THRESHOLD = 0.5


def score(weights: ModelWeights, pairs: Sequence[SamplePair]) -> ScoredSet:
    """Liveness scores of prepared samples."""
    face, bg, labels = stack_pairs(pairs)
    return ScoredSet(
        scores=predict_scores(face, bg, weights),
        labels=labels,
        subject_ids=tuple(p.subject_id for p in pairs),
    )


def training_threshold(scored: ScoredSet) -> float:
    """EER threshold of the training pool, used for HTER on held-out data."""
    if not scored.has_both_classes:
        logger.warning("⚠️ Training pool has a single class; using the fallback threshold")
        return FALLBACK_THRESHOLD
    return eer(scored)[1]


@dataclass
class FoldResult:
    subject_id: str
    train_subjects: Tuple[str, ...]
    scores: ScoredSet
    threshold: float
    report: Optional[MetricsReport]
    log: TrainLog


def _train_and_score(
    train_pairs: Sequence[SamplePair],
    test_pairs: Sequence[SamplePair],
    cfg: RunConfig,
    fold: int,
) -> Tuple[ScoredSet, float, TrainLog]:
    weights = init_weights(cfg.model, seed=cfg.model_seed(fold))
    train_cfg = dataclasses.replace(cfg.train, seed=cfg.train_seed(fold))
    trainer = Trainer(weights, train_cfg)
    log = trainer.fit(train_pairs)
    threshold = training_threshold(score(weights, train_pairs))
    return score(weights, test_pairs), threshold, log


def run_fold(pairs: Sequence[SamplePair], held_out: str, cfg: RunConfig, fold: int) -> FoldResult:
    """Train on every subject but `held_out`, then score `held_out`."""
    train_pairs = [p for p in pairs if p.subject_id != held_out]
    test_pairs = [p for p in pairs if p.subject_id == held_out]
    if any(p.subject_id == held_out for p in train_pairs) or not test_pairs:
        raise ProtocolError(f"fold {fold}: held-out subject {held_out} leaks into training or has no samples")
    if not train_pairs:
        raise ProtocolError(f"fold {fold}: no training samples once {held_out} is held out")

    scored, threshold, log = _train_and_score(train_pairs, test_pairs, cfg, fold)
    report = None
    if scored.has_both_classes:
        report = evaluate(scored, threshold=threshold, flr_target=cfg.eval.flr_target)
        logger.info(f"📊 Fold {fold} ({held_out}): {report.format()}")
    else:
        logger.warning(f"⚠️ Fold {fold} ({held_out}): single-class test set, fold metrics unavailable")
    return FoldResult(
        subject_id=held_out,
        train_subjects=tuple(sorted({p.subject_id for p in train_pairs})),
        scores=scored,
        threshold=threshold,
        report=report,
        log=log,
    )


@dataclass
class LosoResult:
    folds: List[FoldResult]
    pooled: MetricsReport
    pooled_scores: ScoredSet

    def lines(self) -> List[str]:
        """Pooled metrics first, then one line per fold."""
        rows = [self.pooled.format()]
        for fold in self.folds:
            body = "na" if fold.report is None else fold.report.format()
            rows.append(f"subject={fold.subject_id} threshold={fold.threshold:.6f} {body}")
        return rows

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text("\n".join(self.lines()) + "\n", encoding="utf-8")
        return path


def pooled_hter(folds: Sequence[FoldResult]) -> float:
    """HTER over all held-out samples, each judged at its own fold's threshold."""
    accepted_masks = rejected_bona = n_mask = n_bona = 0
    for fold in folds:
        far, frr = error_rates(fold.scores, fold.threshold)
        accepted_masks += far * fold.scores.mask.size
        rejected_bona += frr * fold.scores.bonafide.size
        n_mask += fold.scores.mask.size
        n_bona += fold.scores.bonafide.size
    far = accepted_masks / n_mask if n_mask else 0.0
    frr = rejected_bona / n_bona if n_bona else 0.0
    return (far + frr) / 2.0


@log_execution
def loso_run(pairs: Sequence[SamplePair], cfg: RunConfig, background_only_maps: bool = False) -> LosoResult:
    """Leave-one-subject-out over prepared samples.

    Folds follow sorted subject order and may run in parallel
    (`eval.max_workers`); each trains its own model. Headline metrics are
    pooled over every held-out score.
    """
    if background_only_maps:
        pairs = background_only(pairs)
        cfg = copy.deepcopy(cfg)
        cfg.model = background_only_config(cfg.model)
    subjects = sorted({p.subject_id for p in pairs})
    if len(subjects) < 2:
        raise ProtocolError(f"LOSO needs at least 2 subjects, got {len(subjects)}")
    logger.info(f"🚀 LOSO over {len(subjects)} subjects, {len(pairs)} samples ({cfg.model.bg_mode})")

    def run(item: Tuple[int, str]) -> FoldResult:
        fold, subject = item
        return run_fold(pairs, subject, cfg, fold)

    items = list(enumerate(subjects))
    if cfg.eval.max_workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.eval.max_workers) as pool:
            folds = list(pool.map(run, items))
    else:
        folds = [run(item) for item in items]

    pooled_scores = ScoredSet.concat([f.scores for f in folds])
    if len(pooled_scores) != len(pairs):
        raise ProtocolError(f"pooled {len(pooled_scores)} scores for {len(pairs)} samples")
    pooled = dataclasses.replace(
        evaluate(pooled_scores, flr_target=cfg.eval.flr_target), hter=pooled_hter(folds)
    )
    logger.info(f"✅ LOSO pooled: {pooled.format()}")
    return LosoResult(folds=folds, pooled=pooled, pooled_scores=pooled_scores)


@dataclass
class CrossResult:
    report: MetricsReport
    scores: ScoredSet
    threshold: float
    log: TrainLog


@log_execution
def cross_run(train_pairs: Sequence[SamplePair], test_pairs: Sequence[SamplePair], cfg: RunConfig) -> CrossResult:
    """Train on one population and test on another; HTER uses the training EER threshold."""
    scored, threshold, log = _train_and_score(train_pairs, test_pairs, cfg, fold=0)
    report = evaluate(scored, threshold=threshold, flr_target=cfg.eval.flr_target)
    logger.info(f"✅ Cross-population: {report.format()}")
    return CrossResult(report=report, scores=scored, threshold=threshold, log=log)


# --- ablations ---
TARGET_FPS = 30


def _parse_bool(value: str) -> bool:
    lowered = str(value).lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(value)


def _parse_pair(value: str) -> Tuple[int, int]:
    first, second = str(value).lower().split("x")
    return int(first), int(second)


def _set_color_space(cfg: RunConfig, value: str) -> None:
    cfg.color.space = value.upper()
    cfg.model.C = cfg.color.channels


def _set_patch_size(cfg: RunConfig, value: str) -> None:
    cfg.model.P_H, cfg.model.P_W = _parse_pair(value)


def _set_step_size(cfg: RunConfig, value: str) -> None:
    cfg.model.S_H, cfg.model.S_W = _parse_pair(value)


def _set_video_length(cfg: RunConfig, value: str) -> None:
    cfg.model.W = int(round(float(value) * TARGET_FPS))


def _set_bg_mode(cfg: RunConfig, value: str) -> None:
    cfg.model = cfg.model.with_bg_mode(value)


def _set_flag(name: str) -> Callable[[RunConfig, str], None]:
    def setter(cfg: RunConfig, value: str) -> None:
        setattr(cfg.model, name, _parse_bool(value))

    return setter


def _set_int(name: str) -> Callable[[RunConfig, str], None]:
    def setter(cfg: RunConfig, value: str) -> None:
        setattr(cfg.model, name, int(value))

    return setter


AXES: Dict[str, Callable[[RunConfig, str], None]] = {
    "color_space": _set_color_space,
    "patch_size": _set_patch_size,
    "step_size": _set_step_size,
    "video_length": _set_video_length,
    "depth": _set_int("layers"),
    "width": _set_int("D"),
    "bg_branch": lambda cfg, value: _set_bg_mode(cfg, "two_branch" if _parse_bool(value) else "none"),
    "bg_mode": _set_bg_mode,
    "class_token": _set_flag("use_class_token"),
    "pos_embed": _set_flag("use_pos_embed"),
    "aux_losses": _set_flag("aux_losses"),
}

AXIS_DEFAULTS: Dict[str, Tuple[str, ...]] = {
    "color_space": ("RGB", "G", "YUV", "RGBYUV", "CHROM", "POS"),
    "patch_size": ("3x15", "3x30", "5x30", "3x60"),
    "step_size": ("1x15", "1x30", "3x15", "3x30"),
    "video_length": ("3", "5", "7", "10"),
    "depth": ("3", "6", "9", "12"),
    "width": ("48", "96", "144", "192"),
    "bg_branch": ("true", "false"),
    "bg_mode": ("two_branch", "none", "concat"),
    "class_token": ("true", "false"),
    "pos_embed": ("true", "false"),
    "aux_losses": ("true", "false"),
}

# Directions reported on real data; compared in the log only.
EXPECTED_BEST = {
    "color_space": "RGB",
    "bg_branch": "true",
    "class_token": "true",
    "pos_embed": "true",
    "aux_losses": "true",
}


def variant_config(cfg: RunConfig, axis: str, value: str) -> RunConfig:
    """Copy of `cfg` with one ablation axis set to `value`."""
    if axis not in AXES:
        raise ProtocolError(f"unknown ablation axis '{axis}', expected one of {sorted(AXES)}")
    variant = copy.deepcopy(cfg)
    try:
        AXES[axis](variant, value)
        variant.validate()
    except (ValueError, ConfigurationError) as e:
        raise ProtocolError(f"invalid value '{value}' for ablation axis '{axis}': {e}") from e
    return variant


@dataclass(frozen=True)
class AblationRow:
    axis: str
    value: str
    report: MetricsReport

    def csv(self) -> str:
        r = self.report
        return f"{self.axis},{self.value},{r.auc:.6f},{r.eer:.6f},{r.ffr_at_flr:.6f}"


def write_ablation_csv(rows: Sequence[AblationRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text("\n".join(["axis,value,auc,eer,ffr"] + [row.csv() for row in rows]) + "\n", encoding="utf-8")
    return path


def _log_observations(axis: str, rows: Sequence[AblationRow]) -> None:
    best = max(rows, key=lambda row: row.report.auc)
    logger.info(f"📊 {axis}: best AUC {best.report.auc:.4f} at {best.value}")
    expected = EXPECTED_BEST.get(axis)
    if expected is not None and any(row.value == expected for row in rows):
        agrees = "agrees" if best.value == expected else "differs"
        logger.info(f"📊 {axis}: observed best '{best.value}' {agrees} with the reported best '{expected}'")


@log_execution
def ablation_sweep(
    dataset: Sequence[RegionTraceSet],
    cfg: RunConfig,
    axis: str,
    values: Optional[Sequence[str]] = None,
) -> List[AblationRow]:
    """One LOSO run per axis value on the same seeded traces; report-only."""
    values = tuple(values) if values else AXIS_DEFAULTS.get(axis, ())
    variants = [(str(value), variant_config(cfg, axis, str(value))) for value in values]
    if not variants:
        raise ProtocolError(f"no values to sweep for axis '{axis}'")
    rows = []
    for value, variant in variants:
        logger.info(f"🔧 Ablation {axis}={value}")
        pairs = prepare_dataset(dataset, variant.color, variant.model)
        result = loso_run(pairs, variant)
        rows.append(AblationRow(axis=axis, value=value, report=result.pooled))
    _log_observations(axis, rows)
    return rows


def fold_summary(result: LosoResult) -> Dict[str, float]:
    """Per-fold metric means over folds with both classes."""
    reports = [f.report for f in result.folds if f.report is not None]
    if not reports:
        return {}
    return {
        "auc": float(np.mean([r.auc for r in reports])),
        "eer": float(np.mean([r.eer for r in reports])),
        "hter": float(np.mean([r.hter for r in reports])),
        "ffr_at_flr": float(np.mean([r.ffr_at_flr for r in reports])),
    }
