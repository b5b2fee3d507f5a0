"""Mini-batch training loop, training log and resumable checkpoints."""
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from time import perf_counter
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.conf import ModelConfig, TrainConfig
from ..exceptions import CheckpointError, NumericError, ProtocolError
from ..mstmap.pipeline import SamplePair
from ..model.transrppg import forward, hierarchical_loss
from ..model.weights import (
    ModelWeights,
    decode_tensors,
    encode_tensors,
    parameter_shapes,
    weights_from_arrays,
)
from ..utils.logging import get_logger, log_execution
from .optim import AdamState, adam_step, lr_at_epoch

logger = get_logger(__name__)

LOSS_KEYS = ("L_face", "L_bg", "L_combined", "L_overall")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    lr: float
    losses: Tuple[float, float, float, float]
    wall_time_s: float = 0.0

    def format(self) -> str:
        terms = " ".join(f"{key}={value:.6f}" for key, value in zip(LOSS_KEYS, self.losses))
        return f"epoch={self.epoch} lr={self.lr:.6f} {terms}"

    @property
    def overall(self) -> float:
        return self.losses[3]


@dataclass
class TrainLog:
    records: List[EpochRecord] = field(default_factory=list)

    def append(self, record: EpochRecord) -> None:
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ProtocolError(f"epoch {record.epoch} logged after epoch {self.records[-1].epoch}")
        self.records.append(record)

    def column(self, key: str) -> List[float]:
        index = LOSS_KEYS.index(key)
        return [r.losses[index] for r in self.records]

    def lines(self) -> List[str]:
        return [r.format() for r in self.records]

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text("\n".join(self.lines()) + "\n", encoding="utf-8")
        return path


def stack_pairs(pairs: Sequence[SamplePair]) -> Tuple[np.ndarray, Optional[np.ndarray], np.ndarray]:
    """(face maps, bg maps or None, labels) as batch arrays."""
    if not pairs:
        raise ProtocolError("dataset is empty")
    face = np.stack([p.face for p in pairs])
    has_bg = [p.bg is not None for p in pairs]
    if any(has_bg) and not all(has_bg):
        raise ProtocolError("dataset mixes samples with and without background maps")
    bg = np.stack([p.bg for p in pairs]) if all(has_bg) else None
    labels = np.array([p.label for p in pairs], dtype=np.int64)
    return face, bg, labels


class Trainer:
    """Owns one model's weights and optimizer state for the whole run."""

    def __init__(
        self,
        weights: ModelWeights,
        cfg: TrainConfig,
        state: Optional[AdamState] = None,
        epoch: int = 0,
    ):
        cfg.validate()
        self.weights = weights
        self.cfg = cfg
        self.state = state or AdamState.zeros_like(OrderedDict(weights.items()))
        self.epoch = epoch
        self.log = TrainLog()

    def batches(self, n: int, epoch: int) -> List[np.ndarray]:
        """Batch index lists for `epoch`; the last partial batch is kept."""
        if self.cfg.shuffle:
            order = np.random.default_rng([self.cfg.seed, epoch]).permutation(n)
        else:
            order = np.arange(n)
        return [order[i:i + self.cfg.batch_size] for i in range(0, n, self.cfg.batch_size)]

    def _accumulate(self, face, bg, labels, batch: np.ndarray) -> np.ndarray:
        """Backward over micro-batches so the gradient equals the batch-mean gradient."""
        totals = np.zeros(len(LOSS_KEYS))
        for start in range(0, len(batch), self.cfg.micro_batch):
            micro = batch[start:start + self.cfg.micro_batch]
            out = forward(face[micro], None if bg is None else bg[micro], self.weights)
            loss = hierarchical_loss(out, labels[micro], self.weights.config)
            share = len(micro) / len(batch)
            (loss.total * share).backward()
            totals += share * np.array([loss.values()[key] for key in LOSS_KEYS])
        return totals

    def run_epoch(self, face, bg, labels, epoch: int) -> EpochRecord:
        start = perf_counter()
        lr = lr_at_epoch(epoch, self.cfg)
        sums = np.zeros(len(LOSS_KEYS))
        for index, batch in enumerate(self.batches(len(labels), epoch)):
            self.weights.zero_grad()
            try:
                batch_losses = self._accumulate(face, bg, labels, batch)
            except NumericError as e:
                raise NumericError(f"epoch {epoch} batch {index} ({e.where})", e.detail) from e
            if not np.isfinite(batch_losses[[0, 2, 3]]).all():
                raise NumericError(f"epoch {epoch} batch {index}", "non-finite loss")
            grads = {name: t.grad for name, t in self.weights.items()}
            adam_step(OrderedDict(self.weights.items()), grads, self.state, self.cfg, self.state.step + 1, lr=lr)
            sums += batch_losses * len(batch)
        self.weights.zero_grad()
        self.epoch = epoch
        means = sums / len(labels)
        return EpochRecord(epoch=epoch, lr=lr, losses=tuple(float(x) for x in means), wall_time_s=perf_counter() - start)

    def fit(self, pairs: Sequence[SamplePair], epochs: Optional[int] = None) -> TrainLog:
        """Train from the next epoch up to max_epochs, or for `epochs` more epochs."""
        face, bg, labels = stack_pairs(pairs)
        last = self.cfg.max_epochs if epochs is None else min(self.cfg.max_epochs, self.epoch + epochs)
        for epoch in range(self.epoch + 1, last + 1):
            record = self.run_epoch(face, bg, labels, epoch)
            self.log.append(record)
            logger.info(
                f"📊 Epoch {epoch}/{self.cfg.max_epochs} lr={record.lr:.2e} "
                f"L_overall={record.overall:.4f} ({record.wall_time_s:.1f}s)"
            )
        return self.log

    # --- checkpoints ---
    def checkpoint_arrays(self) -> "OrderedDict[str, np.ndarray]":
        arrays: "OrderedDict[str, np.ndarray]" = OrderedDict((name, t.data) for name, t in self.weights.items())
        for name in self.state.m:
            arrays[f"adam.m.{name}"] = self.state.m[name]
        for name in self.state.v:
            arrays[f"adam.v.{name}"] = self.state.v[name]
        arrays["adam.step"] = np.array([self.state.step], dtype=np.float32)
        arrays["train.epoch"] = np.array([self.epoch], dtype=np.float32)
        return arrays

    def save_checkpoint(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        try:
            path.write_bytes(encode_tensors(self.checkpoint_arrays()))
        except OSError as e:
            raise CheckpointError(str(path), str(e))
        logger.debug(f"Checkpoint written to {path} (epoch {self.epoch}, step {self.state.step})")
        return path

    @classmethod
    def resume(cls, path: Union[str, Path], model_cfg: ModelConfig, cfg: TrainConfig) -> "Trainer":
        """Rebuild weights, Adam moments and counters from a training checkpoint."""
        path = Path(path)
        if not path.exists():
            raise CheckpointError(str(path), "file not found")
        arrays = decode_tensors(path.read_bytes(), source=str(path))
        weights = weights_from_arrays(model_cfg, arrays)
        names = list(parameter_shapes(model_cfg))
        try:
            state = AdamState(
                m={name: arrays[f"adam.m.{name}"].copy() for name in names},
                v={name: arrays[f"adam.v.{name}"].copy() for name in names},
                step=int(arrays["adam.step"][0]),
            )
            epoch = int(arrays["train.epoch"][0])
        except KeyError as e:
            raise CheckpointError(str(path), f"not a training checkpoint, missing {e}")
        return cls(weights, cfg, state=state, epoch=epoch)


@log_execution
def train(
    weights: ModelWeights,
    pairs: Sequence[SamplePair],
    cfg: TrainConfig,
    checkpoint: Optional[Union[str, Path]] = None,
) -> Tuple[ModelWeights, TrainLog]:
    """Train `weights` in place on prepared map pairs; optionally write a checkpoint at the end."""
    trainer = Trainer(weights, cfg)
    log = trainer.fit(pairs)
    if checkpoint is not None:
        trainer.save_checkpoint(checkpoint)
    return trainer.weights, log
