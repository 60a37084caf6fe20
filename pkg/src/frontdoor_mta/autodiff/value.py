"""Tape node and reverse-mode backward pass."""

from typing import Callable, Optional, Sequence

import numpy as np

from frontdoor_mta.errors import ContractViolation

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Value:
    """A node of the differentiation tape.

    ``data`` and ``grad`` are float64 arrays of identical shape. Non-leaf nodes keep a
    reference to their parents and a backward rule mapping the upstream gradient to
    one gradient per parent (``None`` for parents that receive nothing).
    """

    __slots__ = ("data", "grad", "op", "parents", "name", "_backward", "__weakref__")

    def __init__(
        self,
        data,
        parents: Sequence["Value"] = (),
        op: str = "leaf",
        backward: Optional[BackwardFn] = None,
        name: Optional[str] = None,
    ):
        self.data = np.array(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data)
        self.op = op
        self.parents = tuple(parents)
        self.name = name
        self._backward = backward

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"<Value{label} op={self.op} shape={self.shape}>"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def item(self) -> float:
        """Scalar value as a Python float."""
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def backward(self) -> dict["Value", np.ndarray]:
        """Shorthand for :func:`backward` on this node."""
        return backward(self)

    # Operator sugar; the rules live in ops.
    def __add__(self, other):
        from frontdoor_mta.autodiff import ops

        return ops.add(self, other)

    def __sub__(self, other):
        from frontdoor_mta.autodiff import ops

        return ops.sub(self, other)

    def __mul__(self, other):
        from frontdoor_mta.autodiff import ops

        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from frontdoor_mta.autodiff import ops

        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from frontdoor_mta.autodiff import ops

        return ops.matmul(self, other)


def topological_order(root: Value) -> list[Value]:
    """Nodes reachable from ``root`` with every parent before its children."""
    order: list[Value] = []
    visited: set[int] = set()
    stack: list[tuple[Value, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in reversed(node.parents):
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Value) -> dict[Value, np.ndarray]:
    """Populate ``grad`` on every node reachable from a scalar ``loss``.

    Gradients accumulate into ``.grad`` across calls; each call propagates only the
    gradient of its own pass.

    Returns:
        Map from each reachable leaf to the gradient contributed by this pass
    """
    if loss.data.size != 1:
        raise ContractViolation(f"backward needs a scalar loss, got shape {loss.shape}")

    order = topological_order(loss)
    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}

    for node in reversed(order):
        upstream = pending.pop(id(node), None)
        if upstream is None:
            continue
        node.grad = node.grad + upstream
        if node._backward is None:
            pending[id(node)] = upstream
            continue
        for parent, grad in zip(node.parents, node._backward(upstream)):
            if grad is None:
                continue
            key = id(parent)
            pending[key] = pending[key] + grad if key in pending else grad

    return {
        node: pending.get(id(node), np.zeros_like(node.data)) for node in order if node.is_leaf
    }
