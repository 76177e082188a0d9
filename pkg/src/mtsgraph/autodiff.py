"""Reverse-mode automatic differentiation over dense float64 arrays.

A ``Tensor`` wraps a numpy array plus the bookkeeping needed to replay the
computation backwards: the parent tensors that produced it and a closure
that maps the output gradient to per-parent gradients.  Calling
``backward()`` on a scalar walks the graph in reverse topological order and
accumulates gradients into leaf tensors (those created directly rather than
by an operation).  Gradients keep accumulating across backward calls until
``zero_grad`` clears them, which is what makes loop-based batch accumulation
work.

Every operation validates shapes eagerly and, unless disabled via
``set_finite_checks(False)``, raises ``NonFiniteDetected`` the moment a NaN
or infinity appears in an output.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import NonFiniteDetected, NotScalar, RunError, ShapeMismatch

DTYPE = np.float64

_grad_enabled = True
_finite_checks = True


def set_finite_checks(enabled: bool) -> None:
    """Globally enable or disable NaN/inf detection on op outputs."""
    global _finite_checks
    _finite_checks = bool(enabled)


@contextlib.contextmanager
def no_grad():
    """Context manager that suppresses graph construction."""
    global _grad_enabled
    saved = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = saved


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # Sum the gradient over axes that numpy broadcasting introduced or
    # stretched, so it matches the original operand shape again.
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A dense float64 array with an optional gradient tape entry."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp", "_op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Callable[[np.ndarray], tuple] | None = None
        self._op = "leaf"

    # -- construction helpers --------------------------------------------

    @staticmethod
    def _result(data: np.ndarray, parents: tuple["Tensor", ...],
                vjp: Callable[[np.ndarray], tuple], op: str) -> "Tensor":
        if _finite_checks and not np.all(np.isfinite(data)):
            raise NonFiniteDetected(
                f"{op} produced a non-finite value "
                f"(operand shapes {[p.shape for p in parents]})")
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out._op = op
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._vjp = vjp
        else:
            out.requires_grad = False
            out._parents = ()
            out._vjp = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """A constant tensor sharing this tensor's values."""
        return Tensor(self.data)

    def __repr__(self) -> str:
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self._op}{flag})"

    # -- arithmetic --------------------------------------------------------

    @staticmethod
    def _wrap(value) -> "Tensor":
        return value if isinstance(value, Tensor) else Tensor(value)

    def __add__(self, other):
        other = Tensor._wrap(other)
        data = self.data + other.data
        sa, sb = self.shape, other.shape

        def vjp(g):
            return _unbroadcast(g, sa), _unbroadcast(g, sb)

        return Tensor._result(data, (self, other), vjp, "add")

    __radd__ = __add__

    def __sub__(self, other):
        other = Tensor._wrap(other)
        data = self.data - other.data
        sa, sb = self.shape, other.shape

        def vjp(g):
            return _unbroadcast(g, sa), _unbroadcast(-g, sb)

        return Tensor._result(data, (self, other), vjp, "sub")

    def __rsub__(self, other):
        return Tensor._wrap(other).__sub__(self)

    def __mul__(self, other):
        other = Tensor._wrap(other)
        data = self.data * other.data
        a, b = self, other

        def vjp(g):
            return (_unbroadcast(g * b.data, a.shape),
                    _unbroadcast(g * a.data, b.shape))

        return Tensor._result(data, (self, other), vjp, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor._wrap(other)
        data = self.data / other.data
        a, b = self, other

        def vjp(g):
            return (_unbroadcast(g / b.data, a.shape),
                    _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

        return Tensor._result(data, (self, other), vjp, "div")

    def __rtruediv__(self, other):
        return Tensor._wrap(other).__truediv__(self)

    def __neg__(self):
        def vjp(g):
            return (-g,)

        return Tensor._result(-self.data, (self,), vjp, "neg")

    def __matmul__(self, other):
        other = Tensor._wrap(other)
        if self.ndim < 2 or other.ndim < 2:
            raise ShapeMismatch(
                f"matmul needs >=2-D operands, got {self.shape} @ {other.shape}")
        if self.shape[-1] != other.shape[-2]:
            raise ShapeMismatch(
                f"matmul inner dimensions disagree: {self.shape} @ {other.shape}")
        data = np.matmul(self.data, other.data)
        a, b = self, other

        def vjp(g):
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

        return Tensor._result(data, (self, other), vjp, "matmul")

    # -- shape ops ---------------------------------------------------------

    def transpose(self, axes: Sequence[int] | None = None) -> "Tensor":
        data = np.transpose(self.data, axes)
        if axes is None:
            inverse = None
        else:
            inverse = tuple(np.argsort(axes))

        def vjp(g):
            return (np.transpose(g, inverse),)

        return Tensor._result(data, (self,), vjp, "transpose")

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        try:
            data = np.reshape(self.data, shape)
        except ValueError as exc:
            raise ShapeMismatch(f"cannot reshape {old} to {shape}") from exc

        def vjp(g):
            return (np.reshape(g, old),)

        return Tensor._result(data, (self,), vjp, "reshape")

    def __getitem__(self, key) -> "Tensor":
        data = np.array(self.data[key])  # copy so later in-place updates
        shape = self.shape               # of the leaf cannot alias into it

        def vjp(g):
            buf = np.zeros(shape, dtype=DTYPE)
            np.add.at(buf, key, g)
            return (buf,)

        return Tensor._result(data, (self,), vjp, "getitem")

    # -- reductions ----------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        data = self.data.sum(axis=axis, keepdims=keepdims)
        shape = self.shape

        def vjp(g):
            g = np.asarray(g)
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor._result(data, (self,), vjp, "sum")

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- pointwise nonlinearities ---------------------------------------------

    def relu(self) -> "Tensor":
        data = np.maximum(self.data, 0.0)
        x = self.data

        def vjp(g):
            return (g * (x > 0.0),)

        return Tensor._result(data, (self,), vjp, "relu")

    def leaky_relu(self, negative_slope: float = 0.2) -> "Tensor":
        data = np.where(self.data > 0.0, self.data, negative_slope * self.data)
        x = self.data

        def vjp(g):
            return (g * np.where(x > 0.0, 1.0, negative_slope),)

        return Tensor._result(data, (self,), vjp, "leaky_relu")

    def sigmoid(self) -> "Tensor":
        # Split by sign so exp never overflows.
        x = self.data
        data = np.where(x >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                        np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

        def vjp(g):
            return (g * data * (1.0 - data),)

        return Tensor._result(data, (self,), vjp, "sigmoid")

    def tanh(self) -> "Tensor":
        data = np.tanh(self.data)

        def vjp(g):
            return (g * (1.0 - data * data),)

        return Tensor._result(data, (self,), vjp, "tanh")

    def exp(self) -> "Tensor":
        data = np.exp(self.data)

        def vjp(g):
            return (g * data,)

        return Tensor._result(data, (self,), vjp, "exp")

    def log(self) -> "Tensor":
        data = np.log(self.data)
        x = self.data

        def vjp(g):
            return (g / x,)

        return Tensor._result(data, (self,), vjp, "log")

    def abs(self) -> "Tensor":
        data = np.abs(self.data)
        x = self.data

        def vjp(g):
            return (g * np.sign(x),)

        return Tensor._result(data, (self,), vjp, "abs")

    def softmax(self, axis: int = -1) -> "Tensor":
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        data = e / e.sum(axis=axis, keepdims=True)

        def vjp(g):
            inner = (g * data).sum(axis=axis, keepdims=True)
            return (data * (g - inner),)

        return Tensor._result(data, (self,), vjp, "softmax")

    # -- graph traversal -----------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``."""
        if self.data.size != 1:
            raise NotScalar(
                f"backward() requires a scalar, got shape {self.shape}")
        if not self.requires_grad:
            raise RunError("backward() on a tensor with no graph attached")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._vjp is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if not parent.requires_grad or pg is None:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


# -- free-function ops --------------------------------------------------------


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Concatenate tensors along ``axis``."""
    tensors = [Tensor._wrap(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, offsets, axis=axis))

    return Tensor._result(data, tuple(tensors), vjp, "concat")


def causal_conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Valid (no padding) 1-D convolution along the middle axis.

    ``x`` has shape (batch, T, C_in) and ``weight`` (K, C_in, C_out); the
    output covers only fully supported positions, shape (batch, T-K+1, C_out).
    """
    if x.ndim != 3 or weight.ndim != 3:
        raise ShapeMismatch(
            f"causal_conv1d expects 3-D operands, got {x.shape} and {weight.shape}")
    if x.shape[2] != weight.shape[1]:
        raise ShapeMismatch(
            f"channel mismatch: input has {x.shape[2]}, kernel expects {weight.shape[1]}")
    k = weight.shape[0]
    t_out = x.shape[1] - k + 1
    if t_out < 1:
        raise ShapeMismatch(
            f"kernel size {k} exceeds sequence length {x.shape[1]}")
    data = np.zeros((x.shape[0], t_out, weight.shape[2]), dtype=DTYPE)
    for j in range(k):
        data += np.matmul(x.data[:, j:j + t_out, :], weight.data[j])
    parents: tuple[Tensor, ...]
    if bias is not None:
        if bias.shape != (weight.shape[2],):
            raise ShapeMismatch(
                f"bias shape {bias.shape} does not match {weight.shape[2]} channels")
        data = data + bias.data
        parents = (x, weight, bias)
    else:
        parents = (x, weight)
    xd, wd = x.data, weight.data

    def vjp(g):
        gx = np.zeros_like(xd)
        gw = np.zeros_like(wd)
        for j in range(k):
            gx[:, j:j + t_out, :] += np.matmul(g, wd[j].T)
            gw[j] = np.einsum("bti,bto->io", xd[:, j:j + t_out, :], g)
        if bias is not None:
            return gx, gw, g.sum(axis=(0, 1))
        return gx, gw

    return Tensor._result(data, parents, vjp, "causal_conv1d")


def glu(x: Tensor, axis: int = -1) -> Tensor:
    """Gated linear unit: split ``axis`` in half, first half * sigmoid(second)."""
    n = x.shape[axis]
    if n % 2 != 0:
        raise ShapeMismatch(f"glu axis has odd size {n}")
    half = n // 2
    index: list = [slice(None)] * x.ndim
    index[axis] = slice(0, half)
    a = x[tuple(index)]
    index[axis] = slice(half, n)
    b = x[tuple(index)]
    return a * b.sigmoid()


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; pass-through when ``rate`` is zero."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return x
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * Tensor(mask)


def cross_entropy_with_logits(logits: Tensor, label: int) -> Tensor:
    """Natural-log cross-entropy of a 1-D logit vector against a class index.

    Composed from primitives so the gradient simplifies to
    softmax(logits) - onehot(label) without a dedicated backward rule.  The
    max shift is detached, which leaves the gradient untouched because the
    loss is invariant to constant logit shifts.
    """
    if logits.ndim != 1:
        raise ShapeMismatch(f"logits must be 1-D, got shape {logits.shape}")
    if not 0 <= label < logits.shape[0]:
        raise ShapeMismatch(
            f"label {label} out of range for {logits.shape[0]} classes")
    shift = Tensor(logits.data.max())
    lse = (logits - shift).exp().sum().log() + shift
    return lse - logits[label]


# -- parameter initialisation ------------------------------------------------


def kaiming_uniform(rng: np.random.Generator, shape: tuple[int, ...],
                    fan_in: int) -> Tensor:
    """He-style uniform init, U(-sqrt(6/fan_in), +sqrt(6/fan_in))."""
    bound = np.sqrt(6.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...],
                   fan_in: int, fan_out: int) -> Tensor:
    """Glorot/Xavier uniform init, U(+-sqrt(6/(fan_in+fan_out)))."""
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def zeros(shape: tuple[int, ...] | int, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape, dtype=DTYPE), requires_grad=requires_grad)


def zero_grad(params: Iterable[Tensor]) -> None:
    """Clear accumulated gradients on the given leaves."""
    for p in params:
        p.grad = None
