"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every primitive builds its output eagerly and records a closure that maps the
output gradient to gradients of its parents.  ``backward`` walks the recorded
graph in reverse topological order and frees it afterwards.

Sparsity (edges, neighborhoods) is expressed through index arrays consumed by
``gather_rows`` / ``scatter_add_rows`` and the segment reductions.
"""
from __future__ import annotations

import hashlib
from collections import OrderedDict
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Tensor", "ShapeError", "NonFiniteError", "tensor", "parameter",
    "add", "sub", "mul", "scale", "neg", "matmul", "transpose",
    "concat_rows", "concat_cols", "slice_rows", "slice_cols",
    "relu", "leaky_relu", "elu", "sigmoid", "tanh", "exp", "log", "softplus",
    "square", "cos", "sin", "sum", "mean", "rowdot", "scale_rows",
    "l2_norm_rows", "softmax_rows", "softmax_segments", "mean_segments",
    "max_segments", "gather_rows", "scatter_add_rows", "clamp",
    "backward", "SGD", "Adam", "sgd_step", "adam_step", "numeric_grad", "rel_error",
]


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim > 2:
            raise ShapeError(f"tensor: only 2-d data supported, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(arr) if requires_grad else None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item: tensor has shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def backward(self, retain_graph: bool = False) -> None:
        backward(self, retain_graph=retain_graph)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.shape), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if not isinstance(other, (int, float)):
            raise TypeError("division is only defined by a scalar")
        return scale(self, 1.0 / float(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def tensor(data, requires_grad: bool = False, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, name=name)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def _as_tensor(x, shape=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (int, float)) and shape is not None:
        return Tensor(np.full(shape, float(x)))
    return Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], fn: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.name = None
    out.requires_grad = any(p.requires_grad for p in parents)
    out.grad = None
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = fn
    else:
        out._parents = ()
        out._backward = None
    return out


def _check_same(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    """``a + b``; ``b`` may be a (1, d) row broadcast over the rows of ``a``."""
    a = _as_tensor(a)
    b = _as_tensor(b, a.shape)
    if a.shape == b.shape:
        return _make(a.data + b.data, (a, b), lambda g: (g, g))
    if b.shape[0] == 1 and b.shape[1] == a.shape[1]:
        return _make(a.data + b.data, (a, b),
                     lambda g: (g, g.sum(axis=0, keepdims=True)))
    if a.shape[0] == 1 and a.shape[1] == b.shape[1]:
        return add(b, a)
    raise ShapeError(f"add: shape mismatch {a.shape} vs {b.shape}")


def sub(a, b) -> Tensor:
    return add(a, neg(_as_tensor(b, _as_tensor(a).shape)))


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same("mul", a, b)
    return _make(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(a: Tensor, c: float) -> Tensor:
    return _make(a.data * c, (a,), lambda g: (g * c,))


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    out = np.clip(a.data, lo, hi)
    inside = (a.data >= lo) & (a.data <= hi)
    return _make(out, (a,), lambda g: (g * inside,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make(a.data * mask, (a,), lambda g: (g * mask,))


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    factor = np.where(a.data > 0, 1.0, slope)
    return _make(a.data * factor, (a,), lambda g: (g * factor,))


def elu(a: Tensor, alpha: float = 1.0) -> Tensor:
    neg_part = alpha * np.expm1(np.minimum(a.data, 0.0))
    out = np.where(a.data > 0, a.data, neg_part)
    deriv = np.where(a.data > 0, 1.0, neg_part + alpha)
    return _make(out, (a,), lambda g: (g * deriv,))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid(a.data)
    return _make(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return _make(t, (a,), lambda g: (g * (1.0 - t * t),))


def exp(a: Tensor) -> Tensor:
    e = np.exp(a.data)
    return _make(e, (a,), lambda g: (g * e,))


def log(a: Tensor) -> Tensor:
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def softplus(a: Tensor) -> Tensor:
    """``log(1 + exp(a))`` in overflow-free form."""
    x = a.data
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    s = _sigmoid(x)
    return _make(out, (a,), lambda g: (g * s,))


def square(a: Tensor) -> Tensor:
    return _make(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,))


def cos(a: Tensor) -> Tensor:
    return _make(np.cos(a.data), (a,), lambda g: (-g * np.sin(a.data),))


def sin(a: Tensor) -> Tensor:
    return _make(np.sin(a.data), (a,), lambda g: (g * np.cos(a.data),))


# ------------------------------------------------------------ linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shape mismatch {a.shape} vs {b.shape}")
    return _make(a.data @ b.data, (a, b),
                 lambda g: (g @ b.data.T, a.data.T @ g))


def transpose(a: Tensor) -> Tensor:
    return _make(a.data.T.copy(), (a,), lambda g: (g.T,))


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    parts = list(parts)
    widths = {p.shape[1] for p in parts}
    if len(widths) != 1:
        raise ShapeError(f"concat_rows: column mismatch {[p.shape for p in parts]}")
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])
    def fn(g):
        return tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(parts)))
    return _make(np.concatenate([p.data for p in parts], axis=0), parts, fn)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    parts = list(parts)
    heights = {p.shape[0] for p in parts}
    if len(heights) != 1:
        raise ShapeError(f"concat_cols: row mismatch {[p.shape for p in parts]}")
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])
    def fn(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(parts)))
    return _make(np.concatenate([p.data for p in parts], axis=1), parts, fn)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    if not 0 <= start <= stop <= a.shape[0]:
        raise ShapeError(f"slice_rows: [{start}:{stop}] out of range for {a.shape}")
    def fn(g):
        full = np.zeros_like(a.data)
        full[start:stop] = g
        return (full,)
    return _make(a.data[start:stop].copy(), (a,), fn)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if not 0 <= start <= stop <= a.shape[1]:
        raise ShapeError(f"slice_cols: [{start}:{stop}] out of range for {a.shape}")
    def fn(g):
        full = np.zeros_like(a.data)
        full[:, start:stop] = g
        return (full,)
    return _make(a.data[:, start:stop].copy(), (a,), fn)


# ----------------------------------------------------------------- reductions

def sum(a: Tensor, axis: int | None = None) -> Tensor:  # noqa: A001
    if axis is None:
        return _make(np.array([[a.data.sum()]]), (a,),
                     lambda g: (np.full_like(a.data, g[0, 0]),))
    if axis == 1:
        return _make(a.data.sum(axis=1, keepdims=True), (a,),
                     lambda g: (np.broadcast_to(g, a.shape).copy(),))
    if axis == 0:
        return _make(a.data.sum(axis=0, keepdims=True), (a,),
                     lambda g: (np.broadcast_to(g, a.shape).copy(),))
    raise ValueError(f"sum: bad axis {axis}")


def mean(a: Tensor) -> Tensor:
    return scale(sum(a), 1.0 / a.data.size)


def rowdot(a: Tensor, b: Tensor) -> Tensor:
    """Row-wise inner products, shape (n, 1)."""
    _check_same("rowdot", a, b)
    out = np.einsum("ij,ij->i", a.data, b.data).reshape(-1, 1)
    return _make(out, (a, b), lambda g: (g * b.data, g * a.data))


def scale_rows(a: Tensor, w: Tensor) -> Tensor:
    """Multiply row i of ``a`` by the scalar ``w[i, 0]``."""
    if w.shape != (a.shape[0], 1):
        raise ShapeError(f"scale_rows: weight shape {w.shape} vs rows of {a.shape}")
    return _make(a.data * w.data, (a, w),
                 lambda g: (g * w.data, np.einsum("ij,ij->i", g, a.data).reshape(-1, 1)))


def l2_norm_rows(a: Tensor) -> Tensor:
    """Euclidean norm of every row, shape (n, 1); subgradient 0 at the origin."""
    norms = np.sqrt(np.einsum("ij,ij->i", a.data, a.data)).reshape(-1, 1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = np.where(norms > 0, a.data / safe, 0.0)
    return _make(norms, (a,), lambda g: (g * unit,))


def softmax_rows(a: Tensor) -> Tensor:
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)
    def fn(g):
        return (s * (g - (g * s).sum(axis=1, keepdims=True)),)
    return _make(s, (a,), fn)


# ----------------------------------------------------------- index-based ops

def _index(index) -> np.ndarray:
    return np.asarray(index, dtype=np.int64).reshape(-1)


_INCIDENCE_CACHE: OrderedDict = OrderedDict()
_INCIDENCE_CACHE_SIZE = 512


def _incidence(index: np.ndarray, n: int) -> sp.csr_matrix:
    """(n, m) 0/1 matrix with a one at (index[j], j); cached because message
    graphs reuse the same index arrays every epoch."""
    m = index.shape[0]
    key = (n, m, hashlib.blake2b(index.tobytes(), digest_size=16).digest())
    hit = _INCIDENCE_CACHE.get(key)
    if hit is not None:
        _INCIDENCE_CACHE.move_to_end(key)
        return hit
    order = np.argsort(index, kind="stable")
    indptr = np.concatenate([[0], np.cumsum(np.bincount(index, minlength=n))])
    mat = sp.csr_matrix((np.ones(m), order, indptr), shape=(n, m))
    _INCIDENCE_CACHE[key] = mat
    if len(_INCIDENCE_CACHE) > _INCIDENCE_CACHE_SIZE:
        _INCIDENCE_CACHE.popitem(last=False)
    return mat


def gather_rows(a: Tensor, index) -> Tensor:
    idx = _index(index)
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ShapeError(f"gather_rows: index out of range for {a.shape}")
    n = a.shape[0]
    def fn(g):
        return (_incidence(idx, n) @ g,)
    return _make(a.data[idx], (a,), fn)


def scatter_add_rows(a: Tensor, index, n: int) -> Tensor:
    """Sum rows of ``a`` into ``n`` destination rows given by ``index``."""
    idx = _index(index)
    if idx.shape[0] != a.shape[0]:
        raise ShapeError(f"scatter_add_rows: {idx.shape[0]} indices for {a.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ShapeError(f"scatter_add_rows: index out of range for {n} rows")
    out = np.asarray(_incidence(idx, n) @ a.data)
    return _make(out, (a,), lambda g: (g[idx],))


def mean_segments(a: Tensor, index, n: int) -> Tensor:
    """Per-destination mean; empty segments yield a zero row."""
    idx = _index(index)
    counts = np.bincount(idx, minlength=n).astype(np.float64)
    inv = np.where(counts > 0, 1.0 / np.maximum(counts, 1.0), 0.0).reshape(-1, 1)
    summed = scatter_add_rows(a, idx, n)
    return _make(summed.data * inv, (summed,), lambda g: (g * inv,))


def max_segments(a: Tensor, index, n: int) -> Tensor:
    """Column-wise per-destination max; empty segments yield a zero row.

    Ties route the gradient to the first maximizing row.
    """
    idx = _index(index)
    if idx.shape[0] != a.shape[0]:
        raise ShapeError(f"max_segments: {idx.shape[0]} indices for {a.shape}")
    d = a.shape[1]
    out = np.full((n, d), -np.inf)
    np.maximum.at(out, idx, a.data)
    empty = np.isinf(out)
    out[empty] = 0.0
    # first row attaining the maximum, per (segment, column)
    hit = a.data == out[idx]
    order = np.arange(idx.shape[0])
    argrow = np.full((n, d), -1, dtype=np.int64)
    for j in range(d):
        rows = order[hit[:, j]]
        segs = idx[rows]
        first = np.full(n, -1, dtype=np.int64)
        first[segs[::-1]] = rows[::-1]
        argrow[:, j] = first
    def fn(g):
        ga = np.zeros_like(a.data)
        seg, col = np.nonzero(argrow >= 0)
        ga[argrow[seg, col], col] += g[seg, col]
        return (ga,)
    return _make(out, (a,), fn)


def softmax_segments(a: Tensor, index, n: int) -> Tensor:
    """Softmax of a column of logits (m, 1) within each destination segment."""
    idx = _index(index)
    if a.shape != (idx.shape[0], 1):
        raise ShapeError(f"softmax_segments: logits {a.shape} vs {idx.shape[0]} indices")
    x = a.data[:, 0]
    seg_max = np.full(n, -np.inf)
    np.maximum.at(seg_max, idx, x)
    e = np.exp(x - seg_max[idx]) if idx.size else x.copy()
    denom = np.bincount(idx, weights=e, minlength=n)
    s = (e / denom[idx]).reshape(-1, 1) if idx.size else e.reshape(-1, 1)
    def fn(g):
        gs = g[:, 0] * s[:, 0]
        inner = np.bincount(idx, weights=gs, minlength=n)
        return ((gs - s[:, 0] * inner[idx]).reshape(-1, 1),)
    return _make(s, (a,), fn)


# ------------------------------------------------------------------ backward

def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, retain_graph: bool = False) -> None:
    """Populate ``.grad`` of every tensor that requires grad and feeds ``loss``."""
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order = _topo_order(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None or node._backward is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = np.asarray(pg, dtype=np.float64)
    # gradients land on leaves (parameters and inputs); interior nodes are transient
    for node in order:
        if node._backward is not None:
            continue
        g = grads.get(id(node))
        if g is not None:
            node.grad = g.copy() if node.grad is None else node.grad + g
    if not retain_graph:
        for node in order:
            node._parents = ()
            node._backward = None


# ---------------------------------------------------------------- optimizers

def _named(params) -> list[tuple[str, Tensor]]:
    if isinstance(params, Mapping):
        return list(params.items())
    return [(p.name or f"param{i}", p) for i, p in enumerate(params)]


def _check_finite(name: str, g: np.ndarray) -> None:
    if not np.all(np.isfinite(g)):
        raise NonFiniteError(f"non-finite gradient in parameter {name!r}")


class SGD:
    def __init__(self, params, lr: float = 0.01):
        self.params = _named(params)
        self.lr = lr

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.zero_grad()

    def step(self) -> None:
        for name, p in self.params:
            if p.grad is None:
                continue
            _check_finite(name, p.grad)
            p.data -= self.lr * p.grad


class Adam:
    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = _named(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for _, p in self.params]
        self.v = [np.zeros_like(p.data) for _, p in self.params]

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.zero_grad()

    def step(self) -> None:
        for name, p in self.params:
            if p.grad is not None:
                _check_finite(name, p.grad)
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for i, (_, p) in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / c1
            v_hat = self.v[i] / c2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def sgd_step(params, lr: float = 0.01) -> None:
    SGD(params, lr).step()


def adam_step(params, state: Adam | None = None, lr: float = 1e-3) -> Adam:
    """One Adam update; pass the returned state back in for subsequent steps."""
    if state is None:
        state = Adam(params, lr=lr)
    state.step()
    return state


def numeric_grad(f: Callable[[], float], x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar ``f`` w.r.t. the array ``x`` (in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        fp = f()
        x[i] = old - eps
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2.0 * eps)
    return g


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    """Max elementwise relative error with an absolute floor for near-zero entries."""
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0
