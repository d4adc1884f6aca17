"""Minimal dense-tensor kernel with reverse-mode automatic differentiation.

Values are float64 numpy arrays. Every primitive records an analytic
vector-Jacobian product; calling ``backward()`` on a scalar result fills
``grad`` on every tensor that has ``requires_grad`` set. Shapes follow
numpy broadcasting for the elementwise ops, and ``matmul`` additionally
accepts a leading batch axis so a whole mini-batch can flow through one
graph.

Also holds the on-disk tensor format used by checkpoints and dataset
files: one ASCII header line ``ndim d0 d1 ... dk\\n`` followed by the raw
little-endian float64 stream in row-major order.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, NumericDomainError, ShapeError

Array = np.ndarray


def _as_array(data) -> Array:
    arr = np.asarray(data, dtype=np.float64)
    return arr


class Tensor:
    """A float64 array plus the bookkeeping for reverse-mode autodiff."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp", "_op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad: Array | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None
        self._op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Reverse-mode accumulation from a scalar result."""
        if self.data.size != 1:
            raise ContractError(
                f"backward() requires a scalar result, got shape {self.shape}"
            )
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        flowing: dict[int, Array] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = flowing.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g.copy() if node.grad is None else node.grad + g
            if node._vjp is None:
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None:
                    continue
                acc = flowing.get(id(parent))
                flowing[id(parent)] = pg if acc is None else acc + pg

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op}, requires_grad={self.requires_grad})"

    # operator sugar; scalars and arrays are promoted to constant tensors
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def __neg__(self):
        return mul(self, Tensor(-1.0))

    def __pow__(self, exponent):
        return power(self, exponent)


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(data: Array, op: str, parents: tuple[Tensor, ...], vjp) -> Tensor:
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = parents
        out._vjp = vjp
        out._op = op
    else:
        out._op = op
    return out


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum a broadcasted gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


def _require_finite(op: str, arr: Array) -> None:
    if not np.isfinite(arr).all():
        raise NumericDomainError(f"{op}: non-finite input")


# ---------------------------------------------------------------------------
# Elementwise primitives
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("add", a, b)

    def vjp(g):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(g, b.shape) if b.requires_grad else None,
        )

    return _make(a.data + b.data, "add", (a, b), vjp)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("sub", a, b)

    def vjp(g):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(-g, b.shape) if b.requires_grad else None,
        )

    return _make(a.data - b.data, "sub", (a, b), vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("mul", a, b)

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
        )

    return _make(a.data * b.data, "mul", (a, b), vjp)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("div", a, b)
    if np.any(b.data == 0.0):
        raise NumericDomainError("div: zero divisor")

    def vjp(g):
        ga = _unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape) if b.requires_grad else None
        return ga, gb

    return _make(a.data / b.data, "div", (a, b), vjp)


def power(a: Tensor, exponent: float) -> Tensor:
    """Elementwise ``a ** exponent`` for a scalar exponent.

    Non-integral exponents require a nonnegative base; the derivative at
    base 0 needs exponent >= 1 (the focal-loss range) to stay finite.
    """
    exponent = float(exponent)
    if exponent == 0.0:
        return _make(np.ones_like(a.data), "pow0", (a,), lambda g: (np.zeros_like(a.data),))
    if exponent != int(exponent) and np.any(a.data < 0.0):
        raise NumericDomainError(f"power: negative base with exponent {exponent}")
    with np.errstate(over="ignore", divide="ignore"):
        out = np.power(a.data, exponent)
    _require_finite("power", out)

    def vjp(g):
        base = a.data
        if exponent < 1.0 and np.any(base == 0.0):
            raise NumericDomainError(f"power: gradient singular at 0 for exponent {exponent}")
        return (g * exponent * np.power(base, exponent - 1.0),)

    return _make(out, "pow", (a,), vjp)


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    _require_finite("exp", out)

    def vjp(g):
        return (g * out,)

    return _make(out, "exp", (a,), vjp)


def log(a: Tensor) -> Tensor:
    _require_finite("log", a.data)
    if np.any(a.data <= 0.0):
        raise NumericDomainError("log: non-positive input")
    out = np.log(a.data)

    def vjp(g):
        return (g / a.data,)

    return _make(out, "log", (a,), vjp)


def sigmoid(a: Tensor) -> Tensor:
    # split by sign so the exponential never overflows
    e = np.exp(-np.abs(a.data))
    out = np.where(a.data >= 0, 1.0, e) / (1.0 + e)

    def vjp(g):
        return (g * out * (1.0 - out),)

    return _make(out, "sigmoid", (a,), vjp)


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------


def _reduce_matmul_grad(grad: Array, shape: tuple[int, ...]) -> Array:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis in range(grad.ndim - 2):
        if shape[axis] == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: expected at least 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}") from None

    def vjp(g):
        ga = gb = None
        if a.requires_grad:
            ga = _reduce_matmul_grad(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            if a.ndim == 3 and b.ndim == 2:
                # fold the batch into the rows: one GEMM instead of a
                # batched product followed by a reduction
                gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _reduce_matmul_grad(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return _make(np.matmul(a.data, b.data), "matmul", (a, b), vjp)


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes (matrix transpose; batch axes untouched)."""
    if a.ndim < 2:
        raise ShapeError(f"transpose: need at least 2 axes, got {a.shape}")

    def vjp(g):
        return (np.swapaxes(g, -1, -2),)

    return _make(np.swapaxes(a.data, -1, -2), "transpose", (a,), vjp)


def permute(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    """Reorder all axes (generalized transpose)."""
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"permute: axes {axes} do not permute a {a.ndim}-D tensor")
    inverse = tuple(int(np.argsort(axes)[i]) for i in range(len(axes)))

    def vjp(g):
        return (g.transpose(inverse),)

    return _make(a.data.transpose(axes), "permute", (a,), vjp)


# ---------------------------------------------------------------------------
# Shape manipulation
# ---------------------------------------------------------------------------


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    if int(np.prod(shape)) != a.data.size and -1 not in shape:
        raise ShapeError(f"reshape: cannot view {a.shape} as {tuple(shape)}")

    def vjp(g):
        return (g.reshape(a.shape),)

    return _make(a.data.reshape(shape), "reshape", (a,), vjp)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice ``[start, start+length)`` along one axis."""
    dim = a.shape[axis]
    if start < 0 or length < 1 or start + length > dim:
        raise ShapeError(f"narrow: window [{start}, {start + length}) outside axis of size {dim}")
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def vjp(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return _make(a.data[index], "narrow", (a,), vjp)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ContractError("concat: empty tensor list")
    base = list(tensors[0].shape)
    for t in tensors[1:]:
        other = list(t.shape)
        if len(other) != len(base) or any(
            i != axis % len(base) and other[i] != base[i] for i in range(len(base))
        ):
            raise ShapeError(f"concat: incompatible shapes {tensors[0].shape} and {t.shape}")
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        pieces = []
        for k in range(len(tensors)):
            index = [slice(None)] * g.ndim
            index[axis] = slice(int(offsets[k]), int(offsets[k + 1]))
            pieces.append(g[tuple(index)])
        return tuple(pieces)

    return _make(np.concatenate([t.data for t in tensors], axis=axis), "concat", tuple(tensors), vjp)


# ---------------------------------------------------------------------------
# Reductions and normalizations
# ---------------------------------------------------------------------------


def tsum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), "sum", (a,), vjp)


def tmean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else a.shape[axis]

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.shape),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg / count, a.shape),)

    return _make(a.data.mean(axis=axis, keepdims=keepdims), "mean", (a,), vjp)


def norm(a: Tensor) -> Tensor:
    """Full-tensor L2 norm as a scalar tensor."""
    value = float(np.sqrt((a.data * a.data).sum()))
    if value == 0.0:
        raise NumericDomainError("norm: zero tensor")

    def vjp(g):
        return (g * a.data / value,)

    return _make(np.asarray(value), "norm", (a,), vjp)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, stabilized by max subtraction."""
    _require_finite("softmax", a.data)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _make(out, "softmax", (a,), vjp)


def log_softmax(a: Tensor) -> Tensor:
    """Log-softmax over the last axis via the log-sum-exp identity."""
    _require_finite("log_softmax", a.data)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse
    soft = np.exp(out)

    def vjp(g):
        return (g - soft * g.sum(axis=-1, keepdims=True),)

    return _make(out, "log_softmax", (a,), vjp)


def layer_norm(a: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean and unit variance (no affine)."""
    _require_finite("layer_norm", a.data)
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    out = centered * inv

    def vjp(g):
        gm = g.mean(axis=-1, keepdims=True)
        gy = (g * out).mean(axis=-1, keepdims=True)
        return (inv * (g - gm - out * gy),)

    return _make(out, "layer_norm", (a,), vjp)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def write_tensor(path, array: Array) -> None:
    """Write a float64 array: ASCII header line, then raw little-endian data."""
    arr = np.ascontiguousarray(np.asarray(array, dtype="<f8"))
    header = " ".join([str(arr.ndim)] + [str(d) for d in arr.shape]) + "\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(arr.tobytes())


def read_tensor(path) -> Array:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if not header:
            raise ContractError(f"{path}: empty tensor header")
        ndim = int(header[0])
        if len(header) != ndim + 1:
            raise ContractError(f"{path}: malformed tensor header {header!r}")
        shape = tuple(int(d) for d in header[1:])
        count = int(np.prod(shape)) if shape else 1
        raw = fh.read(count * 8)
    if len(raw) != count * 8:
        raise ContractError(f"{path}: truncated tensor payload")
    return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
