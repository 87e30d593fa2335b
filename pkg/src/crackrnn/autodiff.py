"""Minimal reverse-mode automatic differentiation on dense float64 arrays.

Supports exactly the primitives needed by the crack-growth cell: affine
maps, sigmoid, parametric ReLU, constant scaling, square root, powers,
elementwise multiply/add, column stacking and mean reduction.  Operations
record onto an explicit tape; replaying the tape backward visits each node
once and accumulates gradients on the leaves.  There is no broadcasting
framework beyond what these primitives require.
"""

from __future__ import annotations

import gc
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "constant",
    "parameter",
    "affine",
    "sigmoid",
    "prelu",
    "relu_clip",
    "power",
    "sqrt",
    "scale",
    "add",
    "sub",
    "mul",
    "square",
    "stack_cols",
    "mean_all",
    "finite_difference_gradient",
]

_TAPE_STACK: list["Tape"] = []


class Tensor:
    """A float64 array with an optional gradient accumulator.

    Leaves are created via :func:`constant` or :func:`parameter`; interior
    nodes are created by the op functions below and carry a backward
    closure.  Gradients use a lazy-zero convention: ``grad is None`` means
    zero, and the first accumulation assigns without copying.
    """

    __slots__ = ("value", "grad", "requires_grad", "name", "_backward")

    def __init__(self, value: np.ndarray, requires_grad: bool = False, name: str = ""):
        self.value = value
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._backward: Callable[[], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def accumulate(self, g: np.ndarray) -> None:
        # Never accumulate in place: the incoming buffer may be shared.
        if self.grad is None:
            self.grad = g
        else:
            self.grad = self.grad + g

    def _wants_grad(self) -> bool:
        return self.requires_grad or self._backward is not None

    def __repr__(self) -> str:  # pragma: no cover
        tag = self.name or ("node" if self._backward else "leaf")
        return f"Tensor({tag}, shape={self.value.shape})"


def constant(value, name: str = "") -> Tensor:
    """Wrap an array or scalar as a non-differentiable leaf."""
    return Tensor(np.asarray(value, dtype=np.float64), requires_grad=False, name=name)


def parameter(value, name: str, trainable: bool = True) -> Tensor:
    """Wrap an array as a named leaf that collects gradients when trainable."""
    return Tensor(np.asarray(value, dtype=np.float64), requires_grad=trainable, name=name)


class Tape:
    """Ordered record of one differentiable forward pass.

    Use as a context manager around the forward computation; ops executed
    inside record themselves in execution order, which is already a valid
    topological order for the reverse sweep.  The Python cyclic GC is
    paused inside the context: the tape allocates hundreds of thousands of
    small container objects and generational scans dominate the runtime
    otherwise.  Reference counting still reclaims everything promptly.
    """

    def __init__(self) -> None:
        self._nodes: list[Tensor] = []
        self._consumed = False
        self._gc_was_enabled = False

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        self._gc_was_enabled = gc.isenabled()
        gc.disable()
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _TAPE_STACK.pop()
        assert popped is self
        if self._gc_was_enabled:
            gc.enable()

    def record(self, node: Tensor) -> None:
        self._nodes.append(node)

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(
        self,
        root: Tensor,
        seed_grad: float = 1.0,
        wrt: Iterable[Tensor] = (),
    ) -> dict[str, np.ndarray]:
        """Reverse sweep from ``root``; returns gradients for ``wrt`` leaves.

        Gradient accumulators are reset before the sweep.  Node payloads
        are released as they are consumed, so peak memory stays close to
        the forward pass.  A tape can only be replayed once.
        """
        if self._consumed:
            raise ValueError("tape already replayed; record a new forward pass")
        if not self._nodes:
            raise ValueError("backward called before any forward pass was recorded")
        if not np.isfinite(seed_grad):
            raise ValueError("seed gradient must be finite")
        self._consumed = True

        params = list(wrt)
        for node in self._nodes:
            node.grad = None
        for p in params:
            p.grad = None

        root.grad = np.full(root.value.shape, float(seed_grad))
        for node in reversed(self._nodes):
            if node.grad is not None and node._backward is not None:
                node._backward()
            # Drop payloads so memory is reclaimed during the sweep.
            node.grad = None
            node._backward = None
        self._nodes.clear()

        grads: dict[str, np.ndarray] = {}
        for p in params:
            if p.requires_grad:
                grads[p.name] = p.grad if p.grad is not None else np.zeros_like(p.value)
        return grads


def _active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _attach(out: Tensor, inputs: Sequence[Tensor], backward: Callable[[], None]) -> Tensor:
    tape = _active_tape()
    if tape is not None and any(t._wants_grad() for t in inputs):
        out._backward = backward
        tape.record(out)
    return out


# ---------------------------------------------------------------------------
# primitives


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Batched affine map ``x @ w.T + b`` for ``x`` of shape (B, in).

    ``w`` has shape (out, in) and ``b`` shape (out,).
    """
    xv, wv, bv = x.value, w.value, b.value
    if xv.ndim != 2 or wv.ndim != 2 or xv.shape[1] != wv.shape[1]:
        raise ValueError(
            f"affine shape mismatch: x {xv.shape} vs w {wv.shape} (expected x cols == w cols)"
        )
    if bv.shape != (wv.shape[0],):
        raise ValueError(f"affine bias shape {bv.shape} does not match w rows {wv.shape[0]}")
    out = Tensor(xv @ wv.T + bv)

    def backward() -> None:
        g = out.grad
        if x._wants_grad():
            x.accumulate(g @ wv)
        if w.requires_grad:
            w.accumulate(g.T @ xv)
        if b.requires_grad:
            b.accumulate(g.sum(axis=0))

    return _attach(out, (x, w, b), backward)


def sigmoid(x: Tensor) -> Tensor:
    """Elementwise logistic function, computed via tanh for stability."""
    y = 0.5 * (np.tanh(0.5 * x.value) + 1.0)
    out = Tensor(y)

    def backward() -> None:
        x.accumulate(out.grad * (y * (1.0 - y)))

    return _attach(out, (x,), backward)


def prelu(x: Tensor, alpha: Tensor) -> Tensor:
    """Parametric ReLU: identity for x >= 0, ``alpha * x`` below zero."""
    xv = x.value
    neg = xv < 0.0
    a = float(alpha.value.reshape(-1)[0]) if alpha.value.ndim else float(alpha.value)
    y = np.where(neg, a * xv, xv)
    out = Tensor(y)

    def backward() -> None:
        g = out.grad
        if x._wants_grad():
            x.accumulate(np.where(neg, a * g, g))
        if alpha.requires_grad:
            alpha.accumulate(np.asarray([(g * xv * neg).sum()]))

    return _attach(out, (x, alpha), backward)


def relu_clip(x: Tensor) -> Tensor:
    """Clamp below zero; the clamped branch has zero gradient."""
    pos = x.value > 0.0
    out = Tensor(np.where(pos, x.value, 0.0))

    def backward() -> None:
        x.accumulate(out.grad * pos)

    return _attach(out, (x,), backward)


def power(x: Tensor, exponent: float, coeff: float = 1.0) -> Tensor:
    """``coeff * x**exponent`` for non-negative ``x``.

    Callers must guarantee x >= 0 when the exponent is fractional; the
    cell clamps upstream.  The derivative at exactly zero is taken as
    zero for exponents > 1.
    """
    xv = x.value
    out = Tensor(coeff * xv**exponent)

    def backward() -> None:
        x.accumulate(out.grad * (coeff * exponent) * xv ** (exponent - 1.0))

    return _attach(out, (x,), backward)


def sqrt(x: Tensor) -> Tensor:
    y = np.sqrt(x.value)
    out = Tensor(y)

    def backward() -> None:
        x.accumulate(out.grad * (0.5 / y))

    return _attach(out, (x,), backward)


def scale(x: Tensor, factor: float, shift: float = 0.0) -> Tensor:
    """``factor * x + shift`` with constant factor and shift."""
    out = Tensor(factor * x.value + shift if shift != 0.0 else factor * x.value)

    def backward() -> None:
        x.accumulate(out.grad * factor)

    return _attach(out, (x,), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.value + b.value)

    def backward() -> None:
        g = out.grad
        if a._wants_grad():
            a.accumulate(g)
        if b._wants_grad():
            b.accumulate(g)

    return _attach(out, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.value - b.value)

    def backward() -> None:
        g = out.grad
        if a._wants_grad():
            a.accumulate(g)
        if b._wants_grad():
            b.accumulate(-g)

    return _attach(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.value, b.value
    out = Tensor(av * bv)

    def backward() -> None:
        g = out.grad
        if a._wants_grad():
            a.accumulate(g * bv)
        if b._wants_grad():
            b.accumulate(g * av)

    return _attach(out, (a, b), backward)


def square(x: Tensor) -> Tensor:
    xv = x.value
    out = Tensor(xv * xv)

    def backward() -> None:
        x.accumulate(out.grad * (2.0 * xv))

    return _attach(out, (x,), backward)


def stack_cols(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two (B, 1) columns into a (B, 2) matrix."""
    out = Tensor(np.concatenate((a.value, b.value), axis=1))

    def backward() -> None:
        g = out.grad
        if a._wants_grad():
            a.accumulate(g[:, :1])
        if b._wants_grad():
            b.accumulate(g[:, 1:2])

    return _attach(out, (a, b), backward)


def mean_all(x: Tensor) -> Tensor:
    """Mean over every entry, returning a scalar tensor."""
    n = x.value.size
    out = Tensor(np.asarray(x.value.mean()))

    def backward() -> None:
        x.accumulate(np.full(x.value.shape, float(out.grad) / n))

    return _attach(out, (x,), backward)


# ---------------------------------------------------------------------------
# test oracle


def finite_difference_gradient(
    f: Callable[[np.ndarray], float], theta: np.ndarray, h: float = 1e-6
) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = h
        grad[i] = (f(theta + step) - f(theta - step)) / (2.0 * h)
    return grad
