"""A small reverse-mode automatic differentiation engine on top of numpy.

Each operation records its inputs and a closure that pushes the output
gradient back to them; :meth:`Tensor.backward` walks the recorded graph in
reverse topological order. Only the operations the parser needs exist.
"""

from __future__ import annotations

import contextlib
import math
import struct
import warnings
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

_GRAD_ENABLED = True


class ShapeError(ValueError):
    pass


@contextlib.contextmanager
def no_grad():
    """Disable graph recording (inference)."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype if dtype is not None else np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None):
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() without a gradient needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accumulate(g)
                continue
            for parent, pg in node._backward(g):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, reciprocal(other))
        return mul(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    @property
    def T(self):
        return transpose(self)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)


class Parameter(Tensor):
    """A named trainable tensor."""

    __slots__ = ("name", "trainable")

    def __init__(self, name: str, data, trainable: bool = True):
        data = np.asarray(data)
        super().__init__(data, requires_grad=trainable, dtype=data.dtype if data.dtype.kind == "f" else np.float64)
        self.name = name
        self.trainable = trainable

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._parents = ()
    out._backward = None
    out.requires_grad = False
    if _GRAD_ENABLED:
        live = tuple(p for p in parents if p.requires_grad)
        if live:
            out.requires_grad = True
            out._parents = live
            out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return _make(
        a.data + b.data,
        (a, b),
        lambda g: ((a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape))),
    )


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: ((a, -g),))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return _make(
        a.data * b.data,
        (a, b),
        lambda g: ((a, _unbroadcast(g * b.data, a.shape)), (b, _unbroadcast(g * a.data, b.shape))),
    )


def reciprocal(a: Tensor) -> Tensor:
    y = 1.0 / a.data
    return _make(y, (a,), lambda g: ((a, -g * y * y),))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return (a, _unbroadcast(ga, a.shape)), (b, _unbroadcast(gb, b.shape))

    return _make(a.data @ b.data, (a, b), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(f"concat along axis {axis}: shapes {[t.shape for t in tensors]}") from None
    ax = axis % data.ndim
    bounds = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def backward(g):
        out = []
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            index = [slice(None)] * g.ndim
            index[ax] = slice(lo, hi)
            out.append((t, g[tuple(index)]))
        return out

    return _make(data, tensors, backward)


def take(a: Tensor, index) -> Tensor:
    """Indexing (basic or advanced); gradients scatter-add back."""

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return ((a, full),)

    return _make(a.data[index], (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    return _make(a.data.reshape(shape), (a,), lambda g: ((a, g.reshape(a.shape)),))


def transpose(a: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    if axes is None:
        axes = tuple(range(a.ndim))[::-1]
    inverse = np.argsort(axes)
    return _make(np.transpose(a.data, axes), (a,), lambda g: ((a, np.transpose(g, inverse)),))


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return ((a, np.broadcast_to(g, a.shape)),)

    return _make(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), backward)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return sum_(a, axis, keepdims) * (1.0 / count)


def softmax(a: Tensor, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Numerically stable softmax; ``mask`` (True = keep) zeroes excluded entries exactly."""
    x = a.data
    if mask is not None:
        x = np.where(mask, x, -np.inf)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g):
        return ((a, y * (g - np.sum(g * y, axis=axis, keepdims=True))),)

    return _make(y, (a,), backward)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data
    shifted = x - np.max(x, axis=axis, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    y = shifted - lse
    p = np.exp(y)

    def backward(g):
        return ((a, g - p * np.sum(g, axis=axis, keepdims=True)),)

    return _make(y, (a,), backward)


def max_over(a: Tensor, axis: int = 0) -> Tensor:
    """Maximum along ``axis``; the gradient flows to the first maximal entry."""
    idx = np.argmax(a.data, axis=axis)
    y = np.take_along_axis(a.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def backward(g):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
        return ((a, full),)

    return _make(y, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _make(y, (a,), lambda g: ((a, g * y * (1.0 - y)),))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: ((a, g * (1.0 - y * y)),))


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return _make(y, (a,), lambda g: ((a, g * y),))


def log(a: Tensor) -> Tensor:
    return _make(np.log(a.data), (a,), lambda g: ((a, g / a.data),))


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    inside = (a.data >= lo) & (a.data <= hi)
    return _make(np.clip(a.data, lo, hi), (a,), lambda g: ((a, g * inside),))


def relu(a: Tensor) -> Tensor:
    on = a.data > 0
    return _make(a.data * on, (a,), lambda g: ((a, g * on),))


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a: Tensor) -> Tensor:
    """tanh approximation of GELU (smooth, so finite differences stay reliable)."""
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    y = 0.5 * x * (1.0 + t)

    def backward(g):
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * x**2)
        return ((a, g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner)),)

    return _make(y, (a,), backward)


def layer_norm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = xhat * gamma.data + beta.data

    def backward(g):
        gx_hat = g * gamma.data
        gx = inv * (gx_hat - gx_hat.mean(axis=-1, keepdims=True) - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True))
        reduce = tuple(range(g.ndim - 1))
        return (
            (a, gx),
            (gamma, np.sum(g * xhat, axis=reduce).reshape(gamma.shape)),
            (beta, np.sum(g, axis=reduce).reshape(beta.shape)),
        )

    return _make(y, (a, gamma, beta), backward)


def embedding_lookup(table: Tensor, indices) -> Tensor:
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
        raise ShapeError(f"embedding index out of range for table of {table.shape[0]} rows")

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, indices, g)
        return ((table, full),)

    return _make(table.data[indices], (table,), backward)


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None, width: int = 3) -> Tensor:
    """Valid 1-D convolution over a sequence.

    ``x`` is (length, channels) or (batch, length, channels); ``weight`` is
    (width * channels, filters). Inputs shorter than ``width`` are zero-padded
    on the right.
    """
    data = x.data
    squeeze = data.ndim == 2
    if squeeze:
        data = data[None]
    b, length, channels = data.shape
    if weight.shape[0] != width * channels:
        raise ShapeError(f"conv1d: weight rows {weight.shape[0]} != width {width} * channels {channels}")
    pad = max(0, width - length)
    if pad:
        data = np.concatenate([data, np.zeros((b, pad, channels), dtype=data.dtype)], axis=1)
    steps = data.shape[1] - width + 1
    cols = np.stack([data[:, i : i + width, :].reshape(b, -1) for i in range(steps)], axis=1)
    y = cols @ weight.data
    if bias is not None:
        y = y + bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        g3 = g if not squeeze else g.reshape(1, steps, -1)
        gw = np.einsum("bsk,bsf->kf", cols, g3)
        gcols = (g3 @ weight.data.T).reshape(b, steps, width, channels)
        gx = np.zeros((b, data.shape[1], channels), dtype=data.dtype)
        for i in range(steps):
            gx[:, i : i + width, :] += gcols[:, i]
        gx = gx[:, :length]
        if squeeze:
            gx = gx[0]
        out = [(x, gx), (weight, gw)]
        if bias is not None:
            out.append((bias, g3.sum(axis=(0, 1)).reshape(bias.shape)))
        return out

    return _make(y[0] if squeeze else y, parents, backward)


def maxpool_over_time(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Max over the time axis (second to last); ``mask`` (True = valid) hides padding."""
    if mask is None:
        return max_over(x, axis=-2)
    filled = np.where(mask[..., None], x.data, -np.inf)
    idx = np.argmax(filled, axis=-2)
    y = np.take_along_axis(x.data, np.expand_dims(idx, -2), axis=-2).squeeze(-2)

    def backward(g):
        full = np.zeros_like(x.data)
        np.put_along_axis(full, np.expand_dims(idx, -2), np.expand_dims(g, -2), axis=-2)
        return ((x, full),)

    return _make(y, (x,), backward)


def grad_check(
    f: Callable[[], Tensor],
    params: Iterable[Tensor],
    eps: float = 1e-5,
    samples_per_param: int | None = 20,
    seed: int = 0,
) -> float:
    """Largest relative disagreement between analytic and central-difference gradients.

    ``f`` recomputes a scalar loss from the current parameter values. The
    relative error of a coordinate is ``|a - n| / max(1e-8, |a| + |n|)``.
    ``samples_per_param=None`` checks every coordinate.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = f()
    if not np.isfinite(loss.data).all():
        raise FloatingPointError(f"loss is not finite: {loss.data}")
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    rng = np.random.default_rng(seed)
    worst = 0.0
    skipped = 0
    with no_grad():
        for p, a in zip(params, analytic):
            flat = p.data.reshape(-1)
            coords = np.arange(flat.size)
            if samples_per_param is not None and flat.size > samples_per_param:
                coords = rng.choice(flat.size, samples_per_param, replace=False)
            for c in coords:
                orig = flat[c]
                flat[c] = orig + eps
                up = float(f().data)
                flat[c] = orig - eps
                down = float(f().data)
                flat[c] = orig
                if not (math.isfinite(up) and math.isfinite(down)):
                    skipped += 1
                    continue
                numeric = (up - down) / (2 * eps)
                analytic_c = float(a.reshape(-1)[c])
                err = abs(analytic_c - numeric) / max(1e-8, abs(analytic_c) + abs(numeric))
                worst = max(worst, err)
    if skipped:
        warnings.warn(f"grad_check: {skipped} coordinates gave a non-finite loss and were not compared", RuntimeWarning)
    return worst


CHECKPOINT_MAGIC = b"LVAMRCKP"
CHECKPOINT_VERSION = 1


def save_checkpoint(path: str | Path, params: Iterable[tuple[str, np.ndarray]]) -> None:
    """Write ordered (name, shape, little-endian float64 values) records."""
    params = list(params)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<BI", CHECKPOINT_VERSION, len(params)))
        for name, value in params:
            raw = name.encode("utf-8")
            value = np.asarray(value, dtype="<f8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", value.ndim))
            fh.write(struct.pack(f"<{value.ndim}I", *value.shape))
            fh.write(value.tobytes(order="C"))


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a parameter checkpoint")
    pos = len(CHECKPOINT_MAGIC)
    version, count = struct.unpack_from("<BI", blob, pos)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos += 5
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (n,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos : pos + n].decode("utf-8")
        pos += n
        (ndim,) = struct.unpack_from("<B", blob, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", blob, pos)
        pos += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        out[name] = np.frombuffer(blob, dtype="<f8", count=size, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * size
    if pos != len(blob):
        raise ValueError(f"{path}: {len(blob) - pos} trailing bytes")
    return out
