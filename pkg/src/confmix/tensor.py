"""Dense float64 tensors with a replayable reverse-mode tape.

Sized for small perceptron stacks and graph convolutions: eager forward
evaluation, per-primitive backward closures, and a central-difference
oracle (`check_gradient`) that stays independent of the reverse pass.

Every log argument is clamped to [LOG_FLOOR, 1] so cross-entropy style
losses stay finite at the simplex boundary; the same floor is used by
every loss in the package so oracle comparisons see identical values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError, ShapeError, TapeStateError

LOG_FLOOR = 1e-12
LOG_CEIL = 1.0


def _as_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError("tensor values must be finite (no NaN/Inf)")
    return arr


class Tensor:
    """A dense float64 array plus an optional gradient slot.

    Non-leaf tensors remember the primitive that produced them (name,
    parents, forward/backward closures); that record is what `Tape`
    walks. Tensors are confined to one logical thread for the duration
    of a forward/backward pass.
    """

    __slots__ = ("values", "requires_grad", "grad", "_op", "_parents",
                 "_backward", "_forward")

    # keep numpy from absorbing `ndarray <op> Tensor`; the reflected
    # operator then routes through our primitives
    __array_ufunc__ = None

    def __init__(self, values, requires_grad: bool = False):
        self.values = _as_array(values)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._op = None
        self._parents = ()
        self._backward = None
        self._forward = None

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self):
        return self.values.size

    def item(self) -> float:
        if self.values.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.values.reshape(()))

    def __repr__(self):
        tag = self._op or ("leaf*" if self.requires_grad else "leaf")
        return f"Tensor({tag}, shape={self.shape})"

    # ---- operator sugar over the primitives below ----

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, -_coerce(other))

    def __rsub__(self, other):
        return add(_coerce(other), -self)

    def __matmul__(self, other):
        return matmul(self, other)


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(values, op, parents, backward, forward) -> Tensor:
    out = Tensor(values)
    if any(p.requires_grad or p._op is not None for p in parents):
        out.requires_grad = True
        out._op = op
        out._parents = tuple(parents)
        out._backward = backward
        out._forward = forward
    return out


def _accum(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = np.zeros_like(t.values)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, (gd, sd) in enumerate(zip(g.shape, shape)):
        if sd == 1 and gd != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---- primitives ----

def add(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if not _add_compatible(a.shape, b.shape):
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")
    values = a.values + b.values

    def backward(out):
        _accum(a, _unbroadcast(out.grad, a.shape))
        _accum(b, _unbroadcast(out.grad, b.shape))

    return _make(values, "add", (a, b), backward, lambda: a.values + b.values)


def _add_compatible(sa, sb) -> bool:
    if sa == sb:
        return True
    # row-vector bias onto a matrix, or scalar onto anything
    if len(sa) == 2 and sb == (sa[1],):
        return True
    if len(sb) == 2 and sa == (sb[1],):
        return True
    return () in (sa, sb)


def mul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if not _mul_compatible(a.shape, b.shape):
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    values = a.values * b.values

    def backward(out):
        _accum(a, _unbroadcast(out.grad * b.values, a.shape))
        _accum(b, _unbroadcast(out.grad * a.values, b.shape))

    return _make(values, "mul", (a, b), backward, lambda: a.values * b.values)


def _mul_compatible(sa, sb) -> bool:
    if sa == sb or () in (sa, sb):
        return True
    # per-row scaling of a matrix by a column
    if len(sa) == 2 and sb == (sa[0], 1):
        return True
    if len(sb) == 2 and sa == (sb[0], 1):
        return True
    return False


def matmul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} vs {b.shape}")
    values = a.values @ b.values

    def backward(out):
        _accum(a, out.grad @ b.values.T)
        _accum(b, a.values.T @ out.grad)

    return _make(values, "matmul", (a, b), backward, lambda: a.values @ b.values)


def relu(a) -> Tensor:
    a = _coerce(a)
    values = np.maximum(a.values, 0.0)

    def backward(out):
        _accum(a, out.grad * (a.values > 0.0))

    return _make(values, "relu", (a,), backward, lambda: np.maximum(a.values, 0.0))


def log(a) -> Tensor:
    """Natural log of values clamped to [LOG_FLOOR, LOG_CEIL].

    Intended for probabilities; the clamp keeps losses finite at the
    simplex boundary. Gradient is zero wherever the clamp is active.
    """
    a = _coerce(a)

    def fwd():
        return np.log(np.clip(a.values, LOG_FLOOR, LOG_CEIL))

    values = fwd()

    def backward(out):
        inside = (a.values > LOG_FLOOR) & (a.values < LOG_CEIL)
        _accum(a, out.grad * inside / np.clip(a.values, LOG_FLOOR, LOG_CEIL))

    return _make(values, "log", (a,), backward, fwd)


def softmax_rows(a) -> Tensor:
    a = _coerce(a)
    if a.values.ndim != 2:
        raise ShapeError(f"softmax_rows needs a matrix, got shape {a.shape}")

    def fwd():
        z = a.values - a.values.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    values = fwd()

    def backward(out):
        s = out.values
        g = out.grad
        _accum(a, s * (g - (g * s).sum(axis=1, keepdims=True)))

    return _make(values, "softmax_rows", (a,), backward, fwd)


def sum_all(a) -> Tensor:
    a = _coerce(a)

    def backward(out):
        _accum(a, np.broadcast_to(out.grad, a.shape).copy())

    return _make(a.values.sum(), "sum", (a,), backward, lambda: a.values.sum())


def sum_rows(a) -> Tensor:
    a = _coerce(a)
    if a.values.ndim != 2:
        raise ShapeError(f"sum_rows needs a matrix, got shape {a.shape}")

    def backward(out):
        _accum(a, np.broadcast_to(out.grad[:, None], a.shape).copy())

    return _make(a.values.sum(axis=1), "sum_rows", (a,), backward,
                 lambda: a.values.sum(axis=1))


def mean_all(a) -> Tensor:
    a = _coerce(a)
    n = a.values.size

    def backward(out):
        _accum(a, np.broadcast_to(out.grad / n, a.shape).copy())

    return _make(a.values.mean(), "mean", (a,), backward, lambda: a.values.mean())


def take_rows(a, index) -> Tensor:
    """Gather rows; the reverse pass scatter-adds back."""
    a = _coerce(a)
    idx = np.asarray(index, dtype=np.intp)
    if a.values.ndim not in (1, 2):
        raise ShapeError(f"take_rows needs a vector or matrix, got shape {a.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ShapeError(f"take_rows: index out of range for shape {a.shape}")

    def backward(out):
        g = np.zeros_like(a.values)
        np.add.at(g, idx, out.grad)
        _accum(a, g)

    return _make(a.values[idx], "take_rows", (a,), backward, lambda: a.values[idx])


def piecewise_constant(a, fn) -> Tensor:
    """Elementwise map with zero gradient (for step-shaped gates).

    `fn` must be a pure vectorized function; its output is treated as
    locally constant by the reverse pass, the correct derivative almost
    everywhere for piecewise-constant maps.
    """
    a = _coerce(a)

    def backward(out):
        _accum(a, np.zeros_like(a.values))

    return _make(np.asarray(fn(a.values), dtype=np.float64), "piecewise_constant",
                 (a,), backward, lambda: np.asarray(fn(a.values), dtype=np.float64))


def stack_columns(parts) -> Tensor:
    """Stack 1-D tensors of equal length into the columns of a matrix."""
    parts = [_coerce(p) for p in parts]
    if not parts or any(p.values.ndim != 1 for p in parts):
        raise ShapeError("stack_columns needs one or more vectors")
    n = parts[0].shape[0]
    if any(p.shape != (n,) for p in parts):
        raise ShapeError(f"stack_columns: lengths differ, {[p.shape for p in parts]}")

    def fwd():
        return np.stack([p.values for p in parts], axis=1)

    def backward(out):
        for j, p in enumerate(parts):
            _accum(p, out.grad[:, j])

    return _make(fwd(), "stack_columns", tuple(parts), backward, fwd)


# ---- tape ----

@dataclass(frozen=True)
class TapeRecord:
    op: str
    input_ids: tuple
    output_id: int
    node: Tensor


class Tape:
    """Topologically ordered record of the primitives behind one output.

    Every input id precedes its consumer; `replay` re-executes the
    forward closures in order and confirms bit-identical outputs.
    """

    def __init__(self, records):
        self.records = list(records)

    @classmethod
    def from_output(cls, out: Tensor) -> "Tape":
        order, seen, stack = [], set(), [(out, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or node._op is None:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        return cls(TapeRecord(n._op, tuple(id(p) for p in n._parents), id(n), n)
                   for n in order)

    def leaves(self):
        recorded = {r.output_id for r in self.records}
        out, seen = [], set()
        for r in self.records:
            for p in r.node._parents:
                if id(p) not in recorded and id(p) not in seen:
                    seen.add(id(p))
                    out.append(p)
        return out

    def backward(self, out: Tensor):
        if out.values.size != 1:
            raise ContractError(f"backward needs a scalar output, got shape {out.shape}")
        for rec in self.records:
            rec.node.grad = None
        for leaf in self.leaves():
            leaf.grad = None
        out.grad = np.ones_like(out.values)
        for rec in reversed(self.records):
            rec.node._backward(rec.node)

    def replay(self) -> bool:
        for rec in self.records:
            fresh = rec.node._forward()
            if not np.array_equal(np.asarray(fresh), rec.node.values):
                return False
        return True


def backward(out: Tensor):
    """Populate grad slots of every leaf the scalar `out` depends on."""
    out = _coerce(out)
    if out._op is None:
        if not out.requires_grad:
            raise TapeStateError("output is detached from any recorded tape")
        if out.values.size != 1:
            raise ContractError(f"backward needs a scalar output, got shape {out.shape}")
        out.grad = np.ones_like(out.values)
        return
    Tape.from_output(out).backward(out)


def check_gradient(fn, inputs, h: float = 1e-5) -> float:
    """Max relative error between reverse-mode and central differences.

    `fn` must be a pure function of `inputs` returning a scalar Tensor.
    Error for each coordinate is |analytic - fd| / max(1, |analytic|).
    """
    if not (0.0 < h <= 1e-3):
        raise ContractError(f"step size h={h} outside (0, 1e-3]")
    leaves = [t for t in inputs if t.requires_grad]
    out = fn(inputs)
    backward(out)
    analytic = [np.array(t.grad if t.grad is not None else np.zeros_like(t.values))
                for t in leaves]
    worst = 0.0
    for t, grad in zip(leaves, analytic):
        for idx in np.ndindex(t.values.shape):
            keep = t.values[idx]
            t.values[idx] = keep + h
            up = fn(inputs).item()
            t.values[idx] = keep - h
            down = fn(inputs).item()
            t.values[idx] = keep
            fd = (up - down) / (2.0 * h)
            a = grad[idx]
            worst = max(worst, abs(a - fd) / max(1.0, abs(a)))
    return worst
