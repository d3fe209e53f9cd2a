"""Minimal reverse-mode autodiff over numpy arrays.

Every operation builds a node holding the forward value and a closure
that accumulates exact analytic gradients into its parents.  backward()
walks the recorded graph in reverse topological order.  float64
throughout so finite-difference checks are meaningful.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateMaskError, GraphStateError, ParameterError

_NEG_INF = -np.inf


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents if self.requires_grad else ()
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    # operator sugar used heavily by the model code
    def __add__(self, other):
        return add(self, as_tensor(other))

    def __radd__(self, other):
        return add(as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, as_tensor(other))

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, as_tensor(other))

    def __rmul__(self, other):
        return mul(as_tensor(other), self)

    def __matmul__(self, other):
        return matmul(self, as_tensor(other))


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient over the axes that broadcasting expanded."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, parents=(a, b))

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    out._backward = backward
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data, parents=(a, b))

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.data.shape))

    out._backward = backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, parents=(a, b))

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    out._backward = backward
    return out


def scale(a: Tensor, s: float) -> Tensor:
    out = Tensor(a.data * s, parents=(a,))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * s)

    out._backward = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data @ b.data, parents=(a, b))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    out._backward = backward
    return out


def transpose(a: Tensor) -> Tensor:
    out = Tensor(a.data.T, parents=(a,))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.T)

    out._backward = backward
    return out


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    out = Tensor(a.data * mask, parents=(a,))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    out._backward = backward
    return out


def sqrt(a: Tensor) -> Tensor:
    # backward guards the root at 0 so zero residuals stay finite
    root = np.sqrt(a.data)
    out = Tensor(root, parents=(a,))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g / (2.0 * np.maximum(root, 1e-12)))

    out._backward = backward
    return out


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims), parents=(a,))

    def backward(g):
        if not a.requires_grad:
            return
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.data.shape).copy())

    out._backward = backward
    return out


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else a.data.shape[axis]
    return scale(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def gather_rows(table: Tensor, idx) -> Tensor:
    """Row lookup (embedding); gradient scatter-adds into the table."""
    idx = np.asarray(idx, dtype=int)
    out = Tensor(table.data[idx], parents=(table,))

    def backward(g):
        if table.requires_grad:
            acc = np.zeros_like(table.data)
            np.add.at(acc, idx, g)
            table._accumulate(acc)

    out._backward = backward
    return out


def gather(table: Tensor, idx) -> Tensor:
    """Element lookup from a 1-D table with an arbitrary index array."""
    idx = np.asarray(idx, dtype=int)
    out = Tensor(table.data[idx], parents=(table,))

    def backward(g):
        if table.requires_grad:
            acc = np.zeros_like(table.data)
            np.add.at(acc, idx, g)
            table._accumulate(acc)

    out._backward = backward
    return out


def slice_cols(a: Tensor, lo: int, hi: int) -> Tensor:
    out = Tensor(a.data[:, lo:hi], parents=(a,))

    def backward(g):
        if a.requires_grad:
            acc = np.zeros_like(a.data)
            acc[:, lo:hi] = g
            a._accumulate(acc)

    out._backward = backward
    return out


def concat_cols(parts: list[Tensor]) -> Tensor:
    out = Tensor(np.concatenate([p.data for p in parts], axis=1), parents=tuple(parts))
    widths = [p.data.shape[1] for p in parts]

    def backward(g):
        lo = 0
        for p, w in zip(parts, widths):
            if p.requires_grad:
                p._accumulate(g[:, lo : lo + w])
            lo += w

    out._backward = backward
    return out


def masked_softmax(logits: Tensor, blocked=None) -> Tensor:
    """Row-wise softmax with max-subtraction; blocked entries get weight
    exactly 0.

    blocked: optional boolean matrix, True = position may not be
    attended.  A fully blocked row is a contract violation.
    """
    x = logits.data
    if blocked is not None:
        blocked = np.asarray(blocked, dtype=bool)
        if blocked.shape != x.shape:
            raise ParameterError("mask shape must match logits")
        if blocked.all(axis=-1).any():
            raise DegenerateMaskError("attention row with every position masked")
        x = np.where(blocked, _NEG_INF, x)
    shifted = x - x.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    if blocked is not None:
        expd = np.where(blocked, 0.0, expd)
    weights = expd / expd.sum(axis=-1, keepdims=True)
    out = Tensor(weights, parents=(logits,))

    def backward(g):
        if logits.requires_grad:
            inner = (g * weights).sum(axis=-1, keepdims=True)
            grad = weights * (g - inner)
            logits._accumulate(grad)  # blocked entries have weight 0 -> grad 0

    out._backward = backward
    return out


def log_softmax(logits: Tensor) -> Tensor:
    x = logits.data
    shifted = x - x.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - lse
    out = Tensor(logp, parents=(logits,))
    soft = np.exp(logp)

    def backward(g):
        if logits.requires_grad:
            logits._accumulate(g - soft * g.sum(axis=-1, keepdims=True))

    out._backward = backward
    return out


def cross_entropy(logits: Tensor, target_ids) -> Tensor:
    """Mean negative log-likelihood of target ids under row softmaxes."""
    target_ids = np.asarray(target_ids, dtype=int)
    n = logits.data.shape[0]
    if target_ids.shape != (n,):
        raise ParameterError("one target id per logits row required")
    logp = log_softmax(logits)
    rows = np.arange(n)
    picked = Tensor(logp.data[rows, target_ids], parents=(logp,))

    def backward(g):
        if logp.requires_grad:
            acc = np.zeros_like(logp.data)
            acc[rows, target_ids] = g
            logp._accumulate(acc)

    picked._backward = backward
    return scale(tsum(picked), -1.0 / n)


def nll_of_targets(logp: Tensor, target_ids) -> Tensor:
    """Mean negative log-likelihood picked from precomputed log-prob rows."""
    target_ids = np.asarray(target_ids, dtype=int)
    n = logp.data.shape[0]
    if target_ids.shape != (n,):
        raise ParameterError("one target id per log-prob row required")
    rows = np.arange(n)
    picked = Tensor(logp.data[rows, target_ids], parents=(logp,))

    def backward(g):
        if logp.requires_grad:
            acc = np.zeros_like(logp.data)
            acc[rows, target_ids] = g
            logp._accumulate(acc)

    picked._backward = backward
    return scale(tsum(picked), -1.0 / n)


def dropout(a: Tensor, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout with a mask drawn from the caller's generator."""
    if not training or p <= 0.0:
        return a
    if not (0.0 <= p < 1.0):
        raise ParameterError("dropout probability must be in [0, 1)")
    mask = (rng.random(a.data.shape) >= p) / (1.0 - p)
    out = Tensor(a.data * mask, parents=(a,))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    out._backward = backward
    return out


def layer_norm(x: Tensor, gain: Tensor, shift: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row normalization with learned gain and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = Tensor(xhat * gain.data + shift.data, parents=(x, gain, shift))
    d = x.data.shape[-1]

    def backward(g):
        if gain.requires_grad:
            gain._accumulate(_unbroadcast(g * xhat, gain.data.shape))
        if shift.requires_grad:
            shift._accumulate(_unbroadcast(g, shift.data.shape))
        if x.requires_grad:
            gh = g * gain.data
            term = gh - gh.mean(axis=-1, keepdims=True) - xhat * (gh * xhat).mean(
                axis=-1, keepdims=True
            )
            x._accumulate(term * inv)

    out._backward = backward
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into .grad over the recorded graph."""
    if loss.data.size != 1:
        raise ParameterError("backward expects a scalar loss")
    if not loss.requires_grad or not loss._parents:
        raise GraphStateError(
            "no recorded computation graph; run a forward pass in training mode first"
        )
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grads(params: dict[str, Tensor]) -> None:
    for t in params.values():
        t.grad = None
