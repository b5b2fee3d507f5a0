"""Optimizer, schedule and training loop."""
from .optim import AdamState, adam_step, lr_at_epoch
from .trainer import EpochRecord, TrainLog, Trainer, stack_pairs, train

__all__ = [
    "AdamState",
    "EpochRecord",
    "TrainLog",
    "Trainer",
    "adam_step",
    "lr_at_epoch",
    "stack_pairs",
    "train",
]
