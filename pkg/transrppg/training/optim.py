"""Adam with coupled L2 weight decay and the step-halving schedule."""
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Union

import numpy as np

from ..core.conf import TrainConfig
from ..exceptions import DimensionError, ProtocolError
from ..tensor import Tensor

ArrayLike = Union[Tensor, np.ndarray]


def _data(value: ArrayLike) -> np.ndarray:
    return value.data if isinstance(value, Tensor) else value


@dataclass
class AdamState:
    """First and second moments per parameter name, and the number of steps taken."""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Mapping[str, ArrayLike]) -> "AdamState":
        return cls(
            m={name: np.zeros_like(_data(p)) for name, p in params.items()},
            v={name: np.zeros_like(_data(p)) for name, p in params.items()},
        )


def adam_step(
    params: Mapping[str, ArrayLike],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    cfg: TrainConfig,
    step_index: int,
    lr: Optional[float] = None,
) -> AdamState:
    """Update `params` in place.

    g <- g + wd * w, then the bias-corrected Adam update at `step_index` (>= 1).
    """
    if step_index < 1:
        raise ProtocolError(f"Adam step index must be >= 1, got {step_index}")
    lr = cfg.lr if lr is None else lr
    b1, b2 = cfg.beta1, cfg.beta2
    correction1 = 1.0 - b1 ** step_index
    correction2 = 1.0 - b2 ** step_index
    for name, param in params.items():
        w = _data(param)
        g = grads.get(name)
        g = np.zeros_like(w) if g is None else g
        if g.shape != w.shape or state.m[name].shape != w.shape:
            raise DimensionError(f"adam_step '{name}'", w.shape, g.shape, state.m[name].shape)
        g = g + cfg.weight_decay * w
        m = state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        v = state.v[name] = b2 * state.v[name] + (1.0 - b2) * (g * g)
        update = lr * (m / correction1) / (np.sqrt(v / correction2) + cfg.adam_epsilon)
        w -= update.astype(w.dtype, copy=False)
    state.step = step_index
    return state


def lr_at_epoch(epoch: int, cfg: TrainConfig) -> float:
    """Epochs are 1-indexed; from `lr_halve_epoch` on the rate is halved."""
    if not 1 <= epoch <= cfg.max_epochs:
        raise ProtocolError(f"epoch {epoch} outside 1..{cfg.max_epochs}")
    return cfg.lr if epoch < cfg.lr_halve_epoch else cfg.lr / 2.0
