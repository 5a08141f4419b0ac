"""Dense float64 tensors with a define-by-run reverse-mode tape.

Every op that touches a tensor with ``requires_grad`` appends a node to the
active :class:`Tape`.  :func:`backward` walks the tape in reverse execution
order, accumulates gradients into the leaves and then clears the tape.

Only 1-D and 2-D tensors are needed by the model.  Broadcasting is limited to
adding a row vector (shape ``(n,)`` or ``(1, n)``) to an ``(m, n)`` matrix.
"""

from __future__ import annotations

import threading

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class TapeError(RuntimeError):
    """Raised when backward is called with an invalid loss."""


class Tape:
    """Ordered record of executed ops for one thread."""

    def __init__(self):
        self.nodes = []

    def record(self, out, parents, backward_fn):
        self.nodes.append((out, parents, backward_fn))

    def clear(self):
        self.nodes.clear()

    def __len__(self):
        return len(self.nodes)


_local = threading.local()


def get_tape() -> Tape:
    tape = getattr(_local, "tape", None)
    if tape is None:
        tape = _local.tape = Tape()
    return tape


class no_grad:
    """Context manager that suspends tape recording on this thread."""

    def __enter__(self):
        self._prev = getattr(_local, "disabled", False)
        _local.disabled = True
        return self

    def __exit__(self, *exc):
        _local.disabled = self._prev
        return False


def _recording() -> bool:
    return not getattr(_local, "disabled", False)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "is_leaf")

    def __init__(self, data, requires_grad=False, name=None):
        self.is_leaf = True
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # operator sugar
    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_lift(other)))

    def __rsub__(self, other):
        return add(_lift(other), neg(self))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return index_select(self, index)


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn):
    """Build an op output and record it when any parent needs gradients."""
    needs = _recording() and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs)
    out.is_leaf = False
    if needs:
        get_tape().record(out, parents, backward_fn)
    return out


def _accum(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True).reshape(t.data.shape)
    else:
        t.grad += g.reshape(t.data.shape) if g.shape != t.data.shape else g


def backward(loss: Tensor):
    """Populate ``.grad`` on every requires_grad tensor that ``loss`` reaches."""
    if loss.data.size != 1:
        raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = get_tape()
    if not loss.requires_grad:
        tape.clear()
        return
    loss.grad = np.ones_like(loss.data)
    nodes = tape.nodes
    pending = _local.pending = {}
    try:
        # leaves keep their grad; intermediate grads are dropped once used
        for out, parents, fn in reversed(nodes):
            g = out.grad
            if g is None:
                continue
            fn(g)
            if out is not loss:
                out.grad = None
        for leaf, rows, grads in pending.values():
            _accum(leaf, np.concatenate(rows, axis=0).T @ np.concatenate(grads, axis=0))
    finally:
        _local.pending = None
        tape.clear()


# ---------------------------------------------------------------------------
# ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def fn(g):
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            pending = getattr(_local, "pending", None)
            if b.is_leaf and a.data.shape[0] <= 16 and pending is not None:
                # low-rank updates to a weight matrix are stacked into one product
                entry = pending.setdefault(id(b), (b, [], []))
                entry[1].append(a.data)
                entry[2].append(g)
            else:
                _accum(b, a.data.T @ g)

    return _make(a.data @ b.data, (a, b), fn)


def _is_row_bias(a, b):
    """True when ``b`` is a row vector that broadcasts over the rows of ``a``."""
    if a.data.ndim != 2:
        return False
    n = a.shape[1]
    return b.shape == (n,) or b.shape == (1, n)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape == b.shape:
        bias = False
    elif _is_row_bias(a, b):
        bias = True
    elif _is_row_bias(b, a):
        return add(b, a)
    else:
        raise ShapeError(f"elementwise shape mismatch: {a.shape} vs {b.shape}")

    def fn(g):
        _accum(a, g)
        if b.requires_grad:
            _accum(b, g.sum(axis=0) if bias else g)

    return _make(a.data + b.data, (a, b), fn)


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def scale(a: Tensor, k: float) -> Tensor:
    def fn(g):
        _accum(a, g * k)

    return _make(a.data * k, (a,), fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"elementwise shape mismatch: {a.shape} vs {b.shape}")

    def fn(g):
        if a.requires_grad:
            _accum(a, g * b.data)
        if b.requires_grad:
            _accum(b, g * a.data)

    return _make(a.data * b.data, (a, b), fn)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def fn(g):
        _accum(a, g * (1.0 - y * y))

    return _make(y, (a,), fn)


def sigmoid(a: Tensor) -> Tensor:
    # tanh form never overflows
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def fn(g):
        _accum(a, g * y * (1.0 - y))

    return _make(y, (a,), fn)


def elementwise(op_kind: str, *args: Tensor) -> Tensor:
    """Dispatch by name: ``add``, ``mul`` (binary) or ``tanh``, ``sigmoid``."""
    table = {"add": add, "mul": mul, "tanh": tanh, "sigmoid": sigmoid}
    if op_kind not in table:
        raise ValueError(f"unknown elementwise op {op_kind!r}")
    return table[op_kind](*args)


def total(a: Tensor) -> Tensor:
    """Sum of all elements as a 1-element tensor."""

    def fn(g):
        _accum(a, np.broadcast_to(g.reshape(()), a.data.shape))

    return _make(np.array([a.data.sum()]), (a,), fn)


def gather_rows(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    n = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        bad = int(ids[(ids < 0) | (ids >= n)][0])
        raise IndexError(f"row id {bad} out of range for table with {n} rows")

    def fn(g):
        if table.requires_grad:
            full = np.zeros_like(table.data)
            np.add.at(full, ids, g)
            _accum(table, full)

    return _make(table.data[ids], (table,), fn)


def _is_fancy(index):
    parts = index if isinstance(index, tuple) else (index,)
    return any(not isinstance(p, (slice, int, np.integer)) for p in parts)


def index_select(a: Tensor, index) -> Tensor:
    """Numpy-style indexing with a scatter-add backward."""
    fancy = _is_fancy(index)

    def fn(g):
        full = np.zeros_like(a.data)
        if fancy:
            np.add.at(full, index, g)
        else:
            full[index] += g
        _accum(a, full)

    out = a.data[index]
    return _make(np.array(out, copy=True), (a,), fn)


def concat(parts, axis=0) -> Tensor:
    parts = list(parts)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def fn(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                _accum(p, g[tuple(sl)])

    try:
        data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat shape mismatch: {[p.shape for p in parts]}") from exc
    return _make(data, parts, fn)


def reshape(a: Tensor, shape) -> Tensor:
    def fn(g):
        _accum(a, g.reshape(a.data.shape))

    return _make(a.data.reshape(shape), (a,), fn)


def transpose(a: Tensor) -> Tensor:
    def fn(g):
        _accum(a, g.T)

    return _make(a.data.T.copy(), (a,), fn)


def log(a: Tensor) -> Tensor:
    def fn(g):
        _accum(a, g / a.data)

    return _make(np.log(a.data), (a,), fn)


def logsumexp(a: Tensor) -> Tensor:
    """log(sum(exp(a))) over all elements, computed with max subtraction."""
    x = a.data
    m = x.max()
    ex = np.exp(x - m)
    s = ex.sum()
    out = np.array([m + np.log(s)])
    soft = ex / s

    def fn(g):
        _accum(a, g.reshape(()) * soft)

    return _make(out, (a,), fn)


def softmax(a: Tensor) -> Tensor:
    """Softmax over all elements of a 1-D tensor."""
    x = a.data
    ex = np.exp(x - x.max())
    y = ex / ex.sum()

    def fn(g):
        _accum(a, y * (g - (g * y).sum()))

    return _make(y, (a,), fn)


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity when ``rng`` is None or ``rate`` is 0."""
    if rng is None or rate <= 0.0:
        return a
    mask = (rng.random(a.data.shape) >= rate) / (1.0 - rate)

    def fn(g):
        _accum(a, g * mask)

    return _make(a.data * mask, (a,), fn)


def logsumexp_rows(a: Tensor, mask=None) -> Tensor:
    """Row-wise log-sum-exp of a 2-D tensor, optionally over masked entries only.

    Returns shape ``(m,)``.  Every row of ``mask`` must select at least one entry.
    """
    x = a.data
    if x.ndim != 2:
        raise ShapeError(f"logsumexp_rows needs a 2-D tensor, got {a.shape}")
    if mask is None:
        mask = np.ones(x.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise ShapeError(f"mask shape {mask.shape} vs {x.shape}")
        if not mask.any(axis=1).all():
            raise ValueError("every row needs at least one selected entry")
    xm = np.where(mask, x, -np.inf)
    m = xm.max(axis=1, keepdims=True)
    ex = np.exp(xm - m)
    s = ex.sum(axis=1, keepdims=True)
    out = (m + np.log(s)).reshape(-1)
    soft = ex / s

    def fn(g):
        _accum(a, g[:, None] * soft)

    return _make(out, (a,), fn)


def softmax_rows(a: Tensor, mask=None) -> Tensor:
    """Row-wise softmax of a 2-D tensor; masked-out entries get probability 0."""
    x = a.data
    if x.ndim != 2:
        raise ShapeError(f"softmax_rows needs a 2-D tensor, got {a.shape}")
    if mask is not None:
        x = np.where(mask, x, -np.inf)
    ex = np.exp(x - x.max(axis=1, keepdims=True))
    y = ex / ex.sum(axis=1, keepdims=True)

    def fn(g):
        _accum(a, y * (g - (g * y).sum(axis=1, keepdims=True)))

    return _make(y, (a,), fn)
