"""Training and evaluation subcommands."""
import argparse
import dataclasses

from ..core.conf import RunConfig, TrainConfig
from ..decorators.commands import arg, command
from ..evaluation.metrics import evaluate
from ..evaluation.protocols import (
    ablation_sweep,
    cross_run,
    fold_summary,
    loso_run,
    score,
    write_ablation_csv,
)
from ..model.weights import init_weights, load_weights
from ..synth.generator import load_dataset
from ..training.trainer import Trainer
from ..utils.logging import get_logger
from ._common import DATA_ARGUMENT, load_pairs, out_dir, run_config, write_lines

logger = get_logger(__name__)

EPOCHS_ARGUMENT = arg("--epochs", type=int, default=None, help="override train.max_epochs")


def shortened_schedule(cfg: TrainConfig, epochs: int) -> TrainConfig:
    """Fewer epochs with the halving point kept at the same fraction of the run."""
    halve = max(1, min(epochs, round(cfg.lr_halve_epoch * epochs / cfg.max_epochs)))
    shortened = dataclasses.replace(cfg, max_epochs=epochs, lr_halve_epoch=halve)
    shortened.validate()
    return shortened


def _with_epochs(cfg: RunConfig, epochs) -> RunConfig:
    if epochs is not None and epochs != cfg.train.max_epochs:
        cfg.train = shortened_schedule(cfg.train, epochs)
    return cfg


@command(
    name="train",
    help="Train on a manifest and write checkpoint.trpg and train_log.txt",
    arguments=[
        DATA_ARGUMENT,
        EPOCHS_ARGUMENT,
        arg("--resume", default=None, help="training checkpoint to continue from"),
    ],
)
def cmd_train(args: argparse.Namespace) -> int:
    cfg = _with_epochs(run_config(args), args.epochs)
    pairs = load_pairs(args.data, cfg)
    if args.resume:
        trainer = Trainer.resume(args.resume, cfg.model, cfg.train)
        logger.info(f"🔄 Resuming after epoch {trainer.epoch}")
    else:
        trainer = Trainer(init_weights(cfg.model, seed=cfg.model_seed()), cfg.train)
    log = trainer.fit(pairs)

    target = out_dir(args)
    print(trainer.save_checkpoint(target / "checkpoint.trpg"))
    write_lines(target / "train_log.txt", log.lines())
    return 0


@command(
    name="eval",
    help="Score a manifest with a checkpoint and write metrics.txt",
    arguments=[
        DATA_ARGUMENT,
        arg("--checkpoint", required=True, help="weights or training checkpoint"),
        arg("--threshold", type=float, default=None, help="fixed threshold for HTER"),
    ],
)
def cmd_eval(args: argparse.Namespace) -> int:
    cfg = run_config(args)
    weights = load_weights(cfg.model, args.checkpoint)
    report = evaluate(score(weights, load_pairs(args.data, cfg)), threshold=args.threshold, flr_target=cfg.eval.flr_target)
    print(report.format())
    write_lines(out_dir(args) / "metrics.txt", [report.format()])
    return 0


@command(
    name="loso",
    help="Leave-one-subject-out training and evaluation",
    arguments=[
        DATA_ARGUMENT,
        EPOCHS_ARGUMENT,
        arg("--background-only", action="store_true", help="feed background maps to a single-branch model"),
    ],
)
def cmd_loso(args: argparse.Namespace) -> int:
    cfg = _with_epochs(run_config(args), args.epochs)
    result = loso_run(load_pairs(args.data, cfg), cfg, background_only_maps=args.background_only)

    target = out_dir(args)
    fold_dir = target / "folds"
    fold_dir.mkdir(exist_ok=True)
    for fold in result.folds:
        write_lines(fold_dir / f"{fold.subject_id}_train_log.txt", fold.log.lines())
    result.write(target / "metrics.txt")
    summary = fold_summary(result)
    if summary:
        logger.info("📊 Per-fold means: " + " ".join(f"{k}={v:.4f}" for k, v in summary.items()))
    print(result.pooled.format())
    return 0


@command(
    name="ablate",
    help="Sweep one ablation axis with LOSO and write ablation_<axis>.csv",
    arguments=[
        DATA_ARGUMENT,
        EPOCHS_ARGUMENT,
        arg("--axis", default=None, help="ablation axis (default eval.ablation_axis)"),
        arg("--values", default=None, help="comma-separated axis values"),
    ],
)
def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = _with_epochs(run_config(args), args.epochs)
    axis = args.axis or cfg.eval.ablation_axis
    if args.values:
        values = [v.strip() for v in args.values.split(",") if v.strip()]
    else:
        values = list(cfg.eval.ablation_values)
    rows = ablation_sweep(load_dataset(args.data), cfg, axis, values or None)
    path = write_ablation_csv(rows, out_dir(args) / f"ablation_{axis}.csv")
    print(path)
    return 0


@command(
    name="cross",
    help="Train on one population and test on another",
    arguments=[
        arg("--train-data", required=True, help="training manifest"),
        arg("--test-data", required=True, help="test manifest"),
        EPOCHS_ARGUMENT,
    ],
)
def cmd_cross(args: argparse.Namespace) -> int:
    cfg = _with_epochs(run_config(args), args.epochs)
    result = cross_run(load_pairs(args.train_data, cfg), load_pairs(args.test_data, cfg), cfg)

    target = out_dir(args)
    write_lines(target / "cross_metrics.txt", [result.report.format()])
    write_lines(target / "train_log.txt", result.log.lines())
    print(result.report.format())
    return 0
