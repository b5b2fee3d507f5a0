"""Finite-difference gradient suite over every op and the full model loss."""
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..core.conf import ModelConfig
from ..tensor import Tensor, grad_check, ops
from ..utils.logging import get_logger
from .transrppg import forward, hierarchical_loss
from .weights import ModelWeights, group_of, init_weights

logger = get_logger(__name__)

GRADIENT_TOLERANCE = 1e-4
# Absolute floor of the relative-error denominator; keeps round-off on
# near-zero gradients from dominating.
ERROR_FLOOR = 1e-5


def mini_config() -> ModelConfig:
    """Small two-branch geometry that keeps finite differences fast."""
    return ModelConfig(H_face=9, H_bg=7, W=60, C=3, P_H=3, P_W=30, S_H=1, S_W=15, D=12, heads=3, layers=2, mlp_ratio=2)


@dataclass(frozen=True)
class CheckResult:
    name: str
    worst: float
    tolerance: float = GRADIENT_TOLERANCE

    @property
    def passed(self) -> bool:
        return self.worst < self.tolerance

    def format(self) -> str:
        status = "ok" if self.passed else "FAIL"
        return f"{self.name}: worst_rel_err={self.worst:.3e} {status}"


def _t(rng: np.random.Generator, *shape: int, scale: float = 1.0) -> Tensor:
    return Tensor(rng.normal(0.0, scale, size=shape), dtype=np.float64)


def _projected(fn: Callable[..., Tensor], shape_of_output: Sequence[int], rng) -> Callable[..., Tensor]:
    """Scalarize an op as sum(op(...) * R) for a fixed random R."""
    weights = rng.normal(size=tuple(shape_of_output))

    def scalar(*inputs: Tensor) -> Tensor:
        return ops.sum(ops.mul(fn(*inputs), weights))

    return scalar


def _op_cases(rng: np.random.Generator) -> Dict[str, tuple]:
    """name -> (function, inputs); shapes drawn from `rng`."""
    b, m, k, n = (int(v) for v in rng.integers(1, 5, size=4))
    t, d = int(rng.integers(2, 6)), 3 * int(rng.integers(1, 3))
    cases = {}

    a, c = _t(rng, b, m, k), _t(rng, k, n)
    cases["matmul"] = (_projected(ops.matmul, (b, m, n), rng), [a, c])
    x, y = _t(rng, m, n), _t(rng, n)
    cases["add"] = (_projected(ops.add, (m, n), rng), [x, y])
    x, y = _t(rng, m, n), _t(rng, m, 1)
    cases["mul"] = (_projected(ops.mul, (m, n), rng), [x, y])
    x = _t(rng, m, n)
    cases["softmax"] = (_projected(lambda v: ops.softmax(v, axis=-1), (m, n), rng), [x])
    x, g, h = _t(rng, m, d), _t(rng, d), _t(rng, d)
    cases["layer_norm"] = (_projected(ops.layer_norm, (m, d), rng), [x, g, h])
    x = _t(rng, m, n, scale=2.0)
    cases["gelu"] = (_projected(ops.gelu, (m, n), rng), [x])
    labels = rng.integers(0, 2, size=m)
    x = _t(rng, m, scale=3.0)
    cases["bce_with_logits"] = (lambda v: ops.sum(ops.bce_with_logits(v, labels)), [x])
    q, kk, v = _t(rng, b, t, d), _t(rng, b, t, d), _t(rng, b, t, d)
    cases["attention"] = (
        _projected(lambda q_, k_, v_: ops.scaled_dot_product_attention(q_, k_, v_, 1.0 / np.sqrt(d))[0], (b, t, d), rng),
        [q, kk, v],
    )
    x, y = _t(rng, m, n), _t(rng, k, n)
    cases["concat"] = (_projected(lambda p, r: ops.concat([p, r], axis=0), (m + k, n), rng), [x, y])
    x = _t(rng, m + 1, n)
    cases["getitem"] = (_projected(lambda v: v[1:, ::2], (m, (n + 1) // 2), rng), [x])
    x = _t(rng, 1, n)
    cases["broadcast_to"] = (_projected(lambda v: ops.broadcast_to(v, (m, n)), (m, n), rng), [x])
    x = _t(rng, m, n, k)
    cases["transpose_reshape"] = (
        _projected(lambda v: ops.transpose(v, (2, 0, 1)).reshape(k, m * n), (k, m * n), rng),
        [x],
    )
    x = _t(rng, m, n)
    cases["mean"] = (_projected(lambda v: ops.mean(v, axis=0), (n,), rng), [x])
    return cases


def op_checks(seeds: Sequence[int] = range(5)) -> List[CheckResult]:
    """Every differentiable op on random shapes, one result per op (worst over seeds)."""
    worst: Dict[str, float] = OrderedDict()
    for seed in seeds:
        rng = np.random.default_rng(seed)
        for name, (fn, inputs) in _op_cases(rng).items():
            error = grad_check(fn, inputs, floor=ERROR_FLOOR)
            worst[name] = max(worst.get(name, 0.0), error)
    return [CheckResult(name, error) for name, error in worst.items()]


def model_checks(cfg: Optional[ModelConfig] = None, seed: int = 0, batch: int = 2, max_checks: int = 24) -> List[CheckResult]:
    """Full hierarchical loss against each weight group in double precision."""
    cfg = cfg or mini_config()
    rng = np.random.default_rng(seed)
    weights = init_weights(cfg, seed=seed, dtype=np.float64)
    # Nonzero class tokens and biases so every path carries gradient.
    for name, tensor in weights.items():
        if not name.endswith(".gain"):
            tensor.data += rng.normal(0.0, 0.05, size=tensor.shape)
    face = rng.uniform(size=(batch, cfg.face_input_height, cfg.W, cfg.C))
    bg = rng.uniform(size=(batch, cfg.H_bg, cfg.W, cfg.C)) if cfg.use_bg_branch else None
    labels = np.arange(batch) % 2
    names = [name for name, _ in weights.items()]

    groups: Dict[str, List[str]] = OrderedDict()
    for name in names:
        groups.setdefault(group_of(name), []).append(name)

    results = []
    for group, members in groups.items():

        def loss(*tensors: Tensor, members=members) -> Tensor:
            current = OrderedDict(weights.items())
            current.update(zip(members, tensors))
            model = ModelWeights(cfg, current)
            return hierarchical_loss(forward(face, bg, model), labels, cfg).total

        error = grad_check(
            loss, [weights[name] for name in members], max_checks=max_checks, floor=ERROR_FLOOR, seed=seed
        )
        results.append(CheckResult(f"loss/{group}", error))
    return results


def run_gradient_suite(seeds: Sequence[int] = range(5)) -> List[CheckResult]:
    results = op_checks(seeds) + model_checks()
    for result in results:
        (logger.debug if result.passed else logger.warning)(result.format())
    return results
