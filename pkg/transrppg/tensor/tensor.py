"""Dense tensor with reverse-mode automatic differentiation."""
import itertools
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import DimensionError, NumericError, TensorError

DEFAULT_DTYPE = np.float32

_sequence = itertools.count()
_grad_mode = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_grad_mode, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph construction for the current thread."""
    previous = is_grad_enabled()
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = previous


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class TapeNode:
    """Record of the op that produced a tensor.

    `backward` maps the output adjoint to one adjoint per input (None when the
    input does not need one); saved intermediates live in its closure.
    """

    op: str
    inputs: Tuple["Tensor", ...]
    backward: BackwardFn
    seq: int


class Tensor:
    """A row-major float array with an optional gradient and producing node."""

    __array_priority__ = 100

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        dtype: Optional[Any] = None,
        name: Optional[str] = None,
        copy: bool = True,
    ):
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and data.dtype.kind == "f" else DEFAULT_DTYPE
        self.data: np.ndarray = np.array(data, dtype=dtype) if copy else np.asarray(data, dtype=dtype)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.node: Optional[TapeNode] = None
        self.seq = next(_sequence)

    @classmethod
    def from_op(
        cls,
        op: str,
        data: np.ndarray,
        inputs: Sequence["Tensor"],
        backward: BackwardFn,
    ) -> "Tensor":
        """Wrap an op result and record it on the tape when any input needs a gradient."""
        if not np.all(np.isfinite(data)):
            raise NumericError(op)
        out = cls(data, dtype=data.dtype, copy=False)
        if is_grad_enabled() and any(t.requires_grad for t in inputs):
            out.requires_grad = True
            out.node = TapeNode(op=op, inputs=tuple(inputs), backward=backward, seq=out.seq)
        return out

    # --- convenience ---
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise TensorError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        req = ", requires_grad=True" if self.requires_grad else ""
        nm = f", name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{req}{nm})"

    # --- operators ---
    def __add__(self, other: Any) -> "Tensor":
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other: Any) -> "Tensor":
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        from . import ops
        return ops.sub(ops.as_tensor(other, like=self), self)

    def __mul__(self, other: Any) -> "Tensor":
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: float) -> "Tensor":
        from . import ops
        return ops.mul(self, 1.0 / other)

    def __neg__(self) -> "Tensor":
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index: Any) -> "Tensor":
        from . import ops
        return ops.getitem(self, index)

    def reshape(self, *shape: int) -> "Tensor":
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        from . import ops
        return ops.transpose(self, axes or None)

    def sum(self, axis: Any = None, keepdims: bool = False) -> "Tensor":
        from . import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Any = None, keepdims: bool = False) -> "Tensor":
        from . import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    # --- autodiff ---
    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Propagate adjoints to every leaf that requires a gradient.

        Nodes are visited in descending creation order, which is the exact
        reverse of forward construction. Leaf gradients accumulate across calls.
        """
        if not self.requires_grad:
            return
        if grad is None:
            if self.size != 1:
                raise DimensionError("backward (implicit gradient needs a scalar)", self.shape)
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=self.dtype)
        if grad.shape != self.shape:
            raise DimensionError("backward", self.shape, grad.shape)

        for tensor, adjoint in _reverse_sweep(self, grad):
            if tensor.node is None:
                tensor.grad = adjoint.copy() if tensor.grad is None else tensor.grad + adjoint


def _collect(root: Tensor) -> List[Tensor]:
    seen: Dict[int, Tensor] = {}
    stack = [root]
    while stack:
        tensor = stack.pop()
        if id(tensor) in seen or not tensor.requires_grad:
            continue
        seen[id(tensor)] = tensor
        if tensor.node is not None:
            stack.extend(tensor.node.inputs)
    return sorted(seen.values(), key=lambda t: t.seq, reverse=True)


def _reverse_sweep(root: Tensor, grad: np.ndarray) -> Iterator[Tuple[Tensor, np.ndarray]]:
    adjoints: Dict[int, np.ndarray] = {id(root): grad}
    for tensor in _collect(root):
        adjoint = adjoints.pop(id(tensor), None)
        if adjoint is None:
            continue
        yield tensor, adjoint
        if tensor.node is None:
            continue
        for parent, contribution in zip(tensor.node.inputs, tensor.node.backward(adjoint)):
            if contribution is None or not parent.requires_grad:
                continue
            if contribution.shape != parent.shape:
                raise DimensionError(f"{tensor.node.op} backward", parent.shape, contribution.shape)
            key = id(parent)
            adjoints[key] = contribution if key not in adjoints else adjoints[key] + contribution
