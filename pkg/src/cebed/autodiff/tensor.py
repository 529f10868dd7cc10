"""Tensors and the recording tape for reverse-mode differentiation."""

from __future__ import annotations

import threading

import numpy as np

_state = threading.local()


def _stack() -> list:
    if not hasattr(_state, "tapes"):
        _state.tapes = []
    return _state.tapes


class Tensor:
    """Dense real array that may participate in a recorded graph."""

    __slots__ = ("data", "requires_grad", "parents", "backward_fn", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = requires_grad
        self.parents: tuple = ()
        self.backward_fn = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    def __add__(self, other):
        from cebed.autodiff import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from cebed.autodiff import ops

        return ops.add(self, ops.scale(as_tensor(other, self.dtype), -1.0))

    def __neg__(self):
        from cebed.autodiff import ops

        return ops.scale(self, -1.0)

    def __mul__(self, other):
        from cebed.autodiff import ops

        if np.isscalar(other):
            return ops.scale(self, float(other))
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        from cebed.autodiff import ops

        return ops.matmul(self, other)


def as_tensor(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype or np.float32))


class Tape:
    """Records differentiable operations executed inside ``with tape:``.

    Nodes are appended in creation order, which is a topological order of
    the graph; ``backward`` walks it in reverse.
    """

    def __init__(self):
        self.nodes: list[Tensor] = []
        self.params: dict[str, Tensor] = {}

    def __enter__(self):
        _stack().append(self)
        return self

    def __exit__(self, *exc):
        _stack().remove(self)
        return False

    def watch(self, params) -> None:
        items = params.items() if isinstance(params, dict) else ((p.name or str(i), p) for i, p in enumerate(params))
        for name, p in items:
            p.requires_grad = True
            self.params[name] = p

    def record(self, out: Tensor) -> None:
        self.nodes.append(out)

    def gradient(self, loss: Tensor, params=None) -> dict:
        return backward(self, loss, params)


def active_tape() -> Tape | None:
    stack = _stack()
    return stack[-1] if stack else None


def record(out: Tensor, parents: tuple, backward_fn) -> Tensor:
    """Attach ``backward_fn(grad_out) -> tuple of parent grads`` to ``out``
    when a tape is active and some parent needs a gradient."""
    tape = active_tape()
    if tape is None or not any(isinstance(p, Tensor) and p.requires_grad for p in parents):
        return out
    out.requires_grad = True
    out.parents = parents
    out.backward_fn = backward_fn
    tape.record(out)
    return out


def backward(tape: Tape, loss: Tensor, params=None) -> dict:
    """Reverse-mode gradients of scalar ``loss``.

    ``params`` is a dict ``name -> Tensor`` (defaults to the tape's
    registry). Returns ``name -> ndarray``; parameters that do not affect
    the loss get zero gradients.
    """
    if loss.size != 1:
        raise ValueError(f"loss must be a scalar, got shape {loss.shape}")
    params = tape.params if params is None else params
    if not isinstance(params, dict):
        params = {p.name or str(i): p for i, p in enumerate(params)}
    if not loss.requires_grad or loss.backward_fn is None:
        raise ValueError("loss is not reachable from any recorded parameter")
    wanted = {id(p) for p in params.values()}

    grads = {id(loss): np.ones_like(loss.data)}
    try:
        start = len(tape.nodes) - 1 - tape.nodes[::-1].index(loss)
    except ValueError:
        raise ValueError("loss was not recorded on this tape") from None

    for node in reversed(tape.nodes[: start + 1]):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        parent_grads = node.backward_fn(g)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None or not isinstance(parent, Tensor) or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
        # leaves (parameters) keep their gradients in ``grads``
    if not wanted.intersection(grads):
        raise ValueError("loss is not reachable from any of the given parameters")
    return {name: grads.get(id(p), np.zeros_like(p.data)) for name, p in params.items()}
