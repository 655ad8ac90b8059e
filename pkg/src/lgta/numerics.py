"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every model in this package is written against :class:`Tensor`. A tensor
that requires a gradient, or that was computed from one, records its
parents and a closure mapping the output adjoint to input adjoints.
Tensors built only from constants record nothing, so plain forward
evaluation (finite differences, inference) pays no bookkeeping cost.

Node ids increase with creation time, so sorting the reachable nodes by
descending id is a valid reverse topological order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "as_tensor",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "sigmoid",
    "tanh",
    "exp",
    "expm1",
    "log",
    "softmax",
    "concat",
    "stack",
    "getitem",
    "reshape",
    "swapaxes",
    "tsum",
    "tmean",
    "backward",
    "grad_check",
    "GradCheckReport",
]

_ids = itertools.count()


class ShapeError(ValueError):
    """Operand shapes are incompatible for a primitive."""

    def __init__(self, op: str, *shapes: tuple[int, ...]):
        self.op = op
        self.shapes = shapes
        joined = " and ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {joined}")


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "op", "parents", "backward_fn", "id")

    def __init__(self, value, requires_grad: bool = False, *, op: str = "leaf",
                 parents: tuple["Tensor", ...] = (), backward_fn=None):
        if type(value) is not np.ndarray or value.dtype != np.float64:
            value = np.asarray(value, dtype=np.float64)
        self.value = value
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.op = op
        self.parents = parents
        self.backward_fn = backward_fn
        self.id = next(_ids)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(op={self.op}, shape={self.shape}{flag})"

    def numpy(self) -> np.ndarray:
        return self.value

    def item(self) -> float:
        return float(self.value)

    __add__ = lambda self, o: add(self, o)
    __radd__ = lambda self, o: add(o, self)
    __sub__ = lambda self, o: sub(self, o)
    __rsub__ = lambda self, o: sub(o, self)
    __mul__ = lambda self, o: mul(self, o)
    __rmul__ = lambda self, o: mul(o, self)
    __truediv__ = lambda self, o: div(self, o)
    __rtruediv__ = lambda self, o: div(o, self)
    __matmul__ = lambda self, o: matmul(self, o)
    __neg__ = lambda self: neg(self)
    __getitem__ = lambda self, idx: getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value, op: str, parents: Sequence[Tensor], backward_fn) -> Tensor:
    for p in parents:
        if p.requires_grad:
            return Tensor(value, True, op=op, parents=tuple(parents), backward_fn=backward_fn)
    return Tensor(value, op=op)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _elementwise(op: str, fn, a: Tensor, b: Tensor) -> np.ndarray:
    try:
        return fn(a.value, b.value)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


# elementwise binary ------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _node(_elementwise("add", np.add, a, b), "add", (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _node(_elementwise("sub", np.subtract, a, b), "sub", (a, b),
                 lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value
    return _node(_elementwise("mul", np.multiply, a, b), "mul", (a, b),
                 lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value
    out = _elementwise("div", np.divide, a, b)
    return _node(out, "div", (a, b),
                 lambda g: (_unbroadcast(g / bv, av.shape),
                            _unbroadcast(-g * out / bv, bv.shape)))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _node(-a.value, "neg", (a,), lambda g: (-g,))


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes, leading axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    try:
        out = np.matmul(a.value, b.value)
    except ValueError:
        raise ShapeError("matmul", a.shape, b.shape) from None
    av, bv = a.value, b.value

    def back(g):
        ga = np.matmul(g, np.swapaxes(bv, -1, -2))
        gb = np.matmul(np.swapaxes(av, -1, -2), g)
        return _unbroadcast(ga, av.shape), _unbroadcast(gb, bv.shape)

    return _node(out, "matmul", (a, b), back)


# elementwise unary -------------------------------------------------------

def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.value
    # split by sign so exp never overflows
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _node(out, "sigmoid", (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.value)
    return _node(out, "tanh", (a,), lambda g: (g * (1.0 - out * out),))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.value)
    return _node(out, "exp", (a,), lambda g: (g * out,))


def expm1(a) -> Tensor:
    """exp(a) - 1 without cancellation near zero."""
    a = as_tensor(a)
    x = a.value
    return _node(np.expm1(x), "expm1", (a,), lambda g: (g * np.exp(x),))


def log(a) -> Tensor:
    a = as_tensor(a)
    x = a.value
    return _node(np.log(x), "log", (a,), lambda g: (g / x,))


def softmax(a) -> Tensor:
    """Softmax over the last axis with max subtraction."""
    a = as_tensor(a)
    z = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _node(out, "softmax", (a,), back)


# structural --------------------------------------------------------------

def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ValueError("concat: no inputs")
    try:
        out = np.concatenate([t.value for t in ts], axis=axis)
    except ValueError:
        raise ShapeError("concat", *(t.shape for t in ts)) from None
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _node(out, "concat", ts, lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([t.value for t in ts], axis=axis)
    except ValueError:
        raise ShapeError("stack", *(t.shape for t in ts)) from None
    n = len(ts)

    def back(g):
        return tuple(np.take(g, i, axis=axis) for i in range(n))

    return _node(out, "stack", ts, back)


def getitem(a, index) -> Tensor:
    """Basic (non-fancy) indexing: ints, slices, Ellipsis, None."""
    a = as_tensor(a)
    out = a.value[index]
    shape = a.shape

    return _node(np.array(out), "slice", (a,), lambda g: (_IndexedGrad(shape, index, g),))


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    try:
        out = a.value.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", old, tuple(shape)) from None
    return _node(out, "reshape", (a,), lambda g: (g.reshape(old),))


def swapaxes(a, ax1: int, ax2: int) -> Tensor:
    a = as_tensor(a)
    return _node(np.swapaxes(a.value, ax1, ax2), "swapaxes", (a,),
                 lambda g: (np.swapaxes(g, ax1, ax2),))


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    out = a.value.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _node(out, "sum", (a,), back)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.value.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([a.shape[i] for i in axes]))
    return mul(tsum(a, axis, keepdims), 1.0 / count)


# reverse pass ------------------------------------------------------------

class _IndexedGrad:
    """Adjoint that is zero outside ``index``; scattered on accumulation."""

    __slots__ = ("shape", "index", "values")

    def __init__(self, shape, index, values):
        self.shape, self.index, self.values = shape, index, values

    def dense(self) -> np.ndarray:
        full = np.zeros(self.shape)
        full[self.index] = self.values
        return full

def backward(root: Tensor, leaves: Iterable[Tensor] | None = None) -> list[np.ndarray] | None:
    """Accumulate d(root)/d(node) into ``.grad`` of every reachable leaf.

    ``root`` must hold a single value. When ``leaves`` is given, their
    gradients are returned in order; leaves that do not influence
    ``root`` get zeros.
    """
    if root.value.size != 1:
        raise ValueError(f"backward: root must be scalar, got shape {root.shape}")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack_ = [root]
    while stack_:
        node = stack_.pop()
        if node.id in seen or not node.requires_grad:
            continue
        seen.add(node.id)
        order.append(node)
        stack_.extend(node.parents)
    order.sort(key=lambda n: n.id, reverse=True)

    adjoint: dict[int, np.ndarray] = {root.id: np.ones_like(root.value)}
    # ids whose adjoint buffer was allocated here and may be updated in place
    owned: set[int] = set()
    for node in order:
        g = adjoint.pop(node.id, None)
        owned.discard(node.id)
        if g is None:
            continue
        if node.backward_fn is None:
            node.grad = g if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if not parent.requires_grad:
                continue
            pid = parent.id
            current = adjoint.get(pid)
            if isinstance(pg, _IndexedGrad):
                if current is None:
                    current = np.zeros(pg.shape)
                elif pid not in owned:
                    current = current.copy()
                current[pg.index] += pg.values
                adjoint[pid] = current
                owned.add(pid)
            elif current is None:
                adjoint[pid] = pg
            elif pid in owned:
                current += pg
            else:
                adjoint[pid] = current + pg
                owned.add(pid)

    if leaves is None:
        return None
    return [t.grad if t.grad is not None else np.zeros_like(t.value) for t in leaves]


# gradient checking -------------------------------------------------------

@dataclass
class GradCheckReport:
    """Per-entry relative errors |ga - gfd| / max(1, |ga| + |gfd|)."""

    errors: dict[str, np.ndarray]
    analytic: dict[str, np.ndarray]
    numeric: dict[str, np.ndarray]
    tolerance: float
    failures: list[tuple[str, tuple[int, ...], float]] = field(default_factory=list)

    @property
    def max_error(self) -> float:
        return max((float(e.max()) for e in self.errors.values() if e.size), default=0.0)

    @property
    def passed(self) -> bool:
        return not self.failures

    def rows(self):
        for name, err in self.errors.items():
            yield name, err.size, float(err.max()) if err.size else 0.0


def grad_check(
    fn: Callable[[dict[str, Tensor]], Tensor],
    point: Mapping[str, np.ndarray],
    step: float = 1e-5,
    tolerance: float = 1e-4,
    analytic_hook: Callable[[dict[str, np.ndarray]], None] | None = None,
) -> GradCheckReport:
    """Compare reverse-mode gradients of ``fn`` against central differences.

    ``fn`` receives a dict of tensors named like ``point`` and returns a
    scalar tensor. ``analytic_hook`` may mutate the analytic gradients
    before comparison; it exists so callers can prove the check fails.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    base = {k: np.array(v, dtype=np.float64) for k, v in point.items()}

    leaves = {k: Tensor(v.copy(), requires_grad=True) for k, v in base.items()}
    out = fn(leaves)
    grads = backward(out, list(leaves.values()))
    analytic = {k: np.array(g) for k, g in zip(leaves, grads)}
    if analytic_hook is not None:
        analytic_hook(analytic)

    def value_at(values):
        return float(fn({k: Tensor(v) for k, v in values.items()}).value)

    numeric: dict[str, np.ndarray] = {}
    errors: dict[str, np.ndarray] = {}
    failures = []
    for name, arr in base.items():
        fd = np.zeros_like(arr)
        flat = arr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = value_at(base)
            flat[i] = orig - step
            down = value_at(base)
            flat[i] = orig
            fd.reshape(-1)[i] = (up - down) / (2.0 * step)
        ga = analytic[name]
        err = np.abs(ga - fd) / np.maximum(1.0, np.abs(ga) + np.abs(fd))
        numeric[name] = fd
        errors[name] = err
        for idx in zip(*np.nonzero(err > tolerance)):
            failures.append((name, tuple(int(i) for i in idx), float(err[idx])))
    return GradCheckReport(errors, analytic, numeric, tolerance, failures)
