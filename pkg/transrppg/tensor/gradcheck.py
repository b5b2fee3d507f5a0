"""Finite-difference verification of autodiff gradients."""
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ..exceptions import GradientCheckError
from ..utils.logging import get_logger
from .tensor import Tensor, no_grad

logger = get_logger(__name__)


def grad_check(
    f: Callable[..., Tensor],
    x: Union[Tensor, Sequence[Tensor]],
    step: float = 1e-5,
    tolerance: Optional[float] = None,
    max_checks: Optional[int] = None,
    floor: float = 1e-6,
    seed: int = 0,
) -> float:
    """Compare autodiff gradients of scalar `f(*x)` against central differences.

    Returns the worst relative error |a - n| / max(|a|, |n|, floor) over the
    checked entries. `max_checks` samples that many entries per input (seeded);
    by default every entry is checked.
    """
    inputs = [x] if isinstance(x, Tensor) else list(x)
    for t in inputs:
        if t.dtype != np.float64:
            raise GradientCheckError(f"grad_check needs float64 inputs, got {t.dtype} for {t!r}")
        t.requires_grad = True
        t.zero_grad()

    out = f(*inputs)
    if out.size != 1:
        raise GradientCheckError(f"grad_check needs a scalar function, got output shape {out.shape}")
    out.backward()

    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in inputs:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        flat = t.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_checks is not None and max_checks < flat.size:
            indices = np.sort(rng.choice(flat.size, size=max_checks, replace=False))
        for i in indices:
            original = flat[i]
            with no_grad():
                flat[i] = original + step
                plus = f(*inputs).item()
                flat[i] = original - step
                minus = f(*inputs).item()
            flat[i] = original
            numeric = (plus - minus) / (2.0 * step)
            a = analytic.reshape(-1)[i]
            error = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, float(error))

    if tolerance is not None and worst >= tolerance:
        logger.warning(f"⚠️  Gradient check failed: worst relative error {worst:.3e} >= {tolerance:.1e}")
    else:
        logger.debug(f"Gradient check worst relative error {worst:.3e}")
    return worst
