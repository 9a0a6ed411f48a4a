"""Wengert-list reverse mode over dense float64 arrays.

Operations append a node to the active tape while one is open; outside a
``with Tape()`` block they simply compute. Each thread has its own active tape.
"""

import threading
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from vmtunet.core.errors import ShapeMismatch

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_local = threading.local()


class Tensor:
    def __init__(
        self, data, requires_grad: bool = False, name: Optional[str] = None, copy: bool = True
    ):
        self.data = np.array(data, dtype=np.float64) if copy else np.asarray(data, np.float64)
        self.requires_grad = requires_grad
        self.name = name
        self.grad: Optional[np.ndarray] = None
        self.is_leaf = True

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"


class Param(Tensor):
    """A trainable tensor; gradients accumulate into ``.grad`` until zeroed."""

    def __init__(self, name: str, data):
        super().__init__(data, requires_grad=True, name=name)

    def __repr__(self) -> str:
        return f"Param({self.name!r}, shape={self.shape})"


@dataclass
class Node:
    kind: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    def __init__(self):
        self.nodes: List[Node] = []
        self._grads: Dict[int, np.ndarray] = {}
        self._previous: Optional["Tape"] = None

    def __enter__(self) -> "Tape":
        self._previous = current_tape()
        _local.tape = self
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _local.tape = self._previous
        self._previous = None

    def record(self, kind: str, inputs: Sequence[Tensor], output: Tensor, backward: BackwardFn):
        self.nodes.append(Node(kind, tuple(inputs), output, backward))

    def backward(self, output: Tensor, cotangent: Optional[np.ndarray] = None) -> None:
        """
        Propagate ``cotangent`` (ones by default) from ``output`` back through the tape.

        Nodes are visited in exact reverse recording order. Leaf tensors that
        require grad get the result added to their ``.grad``.
        """
        seed = np.ones_like(output.data) if cotangent is None else np.asarray(cotangent, float)
        if seed.shape != output.shape:
            raise ShapeMismatch(f"cotangent {seed.shape} does not match output {output.shape}")
        self._grads = {id(output): seed}
        leaves: Dict[int, Tensor] = {}
        if output.is_leaf and output.requires_grad:
            leaves[id(output)] = output
        for node in reversed(self.nodes):
            g_out = self._grads.get(id(node.output))
            if g_out is None:
                continue
            for tensor, g in zip(node.inputs, node.backward(g_out)):
                if g is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if key in self._grads:
                    self._grads[key] = self._grads[key] + g
                else:
                    self._grads[key] = g
                if tensor.is_leaf:
                    leaves[key] = tensor
        for key, tensor in leaves.items():
            g = self._grads[key]
            tensor.grad = g.copy() if tensor.grad is None else tensor.grad + g

    def grad(self, tensor: Tensor) -> np.ndarray:
        """Gradient of the last backward target w.r.t. any tensor seen on the tape."""
        g = self._grads.get(id(tensor))
        return np.zeros_like(tensor.data) if g is None else g


def current_tape() -> Optional[Tape]:
    return getattr(_local, "tape", None)


def make_output(
    kind: str, inputs: Sequence[Tensor], data: np.ndarray, backward: BackwardFn
) -> Tensor:
    """Wrap ``data`` as the result of ``kind`` and record it when a tape is open."""
    tape = current_tape()
    needs_grad = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs_grad, copy=False)
    if tape is not None and needs_grad:
        out.is_leaf = False
        tape.record(kind, inputs, out, backward)
    return out


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def zero_grad(params: Sequence[Tensor]) -> None:
    for p in params:
        p.zero_grad()
