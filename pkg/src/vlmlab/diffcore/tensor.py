"""Dense float64 tensors with reverse-mode automatic differentiation.

Every forward op records itself on the result node (operands plus a
backward closure); ``backward`` replays the recorded tape in reverse
topological order. The design goal is a small, deterministic, finitely
checkable op set, not speed: 64-bit floats everywhere, no graph rewriting,
broadcasting only across leading batch dimensions.
"""

import contextlib

import numpy as np

from ..errors import DegenerateMaskError, EmptyLossError, RankError, ShapeError
from . import kernels as K

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (e.g. for generation)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """A dense float64 array, optionally tracked on the gradient tape.

    Tracked leaf tensors own a persistent ``grad`` buffer that ``backward``
    accumulates into; intermediate nodes carry transient gradients only
    while a backward pass runs.
    """

    __slots__ = ("data", "grad", "grad_tracked", "_parents", "_backward_fn")

    def __init__(self, data, grad_tracked=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad_tracked = bool(grad_tracked)
        self.grad = np.zeros_like(self.data) if self.grad_tracked else None
        self._parents = ()
        self._backward_fn = None

    @classmethod
    def _node(cls, data, parents, backward_fn):
        """Internal: result of an op, tracked iff any parent is."""
        if _GRAD_ENABLED and any(p.grad_tracked for p in parents):
            t = cls.__new__(cls)
            t.data = data
            t.grad = None
            t.grad_tracked = True
            t._parents = tuple(parents)
            t._backward_fn = backward_fn
            return t
        return cls(data)

    # -- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def is_leaf(self):
        return self._backward_fn is None

    def item(self):
        return float(self.data)

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def detach(self):
        """A constant view of the same data, off the tape."""
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, tracked={self.grad_tracked})"

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes if axes else None)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)


class Parameter:
    """A named, trainable leaf tensor.

    ``trainable=False`` takes the tensor off the tape entirely: no gradient
    is accumulated (frozen weights keep an identically zero grad buffer of
    ``None``) and optimizers skip it.
    """

    __slots__ = ("name", "tensor", "trainable")

    def __init__(self, data, name="", trainable=True):
        self.name = name
        self.tensor = Tensor(data, grad_tracked=trainable)
        self.trainable = trainable

    @property
    def data(self):
        return self.tensor.data

    @property
    def grad(self):
        return self.tensor.grad

    def set_trainable(self, flag):
        flag = bool(flag)
        if flag == self.trainable:
            return
        self.trainable = flag
        self.tensor.grad_tracked = flag
        self.tensor.grad = np.zeros_like(self.tensor.data) if flag else None

    def zero_grad(self):
        self.tensor.zero_grad()

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.tensor.shape}, trainable={self.trainable})"


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------
# elementwise ops
# ---------------------------------------------------------------------

def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data + b.data

    def bw(g):
        contribs = []
        if a.grad_tracked:
            contribs.append((a, _unbroadcast(g, a.shape)))
        if b.grad_tracked:
            contribs.append((b, _unbroadcast(g, b.shape)))
        return contribs

    return Tensor._node(out, (a, b), bw)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data - b.data

    def bw(g):
        contribs = []
        if a.grad_tracked:
            contribs.append((a, _unbroadcast(g, a.shape)))
        if b.grad_tracked:
            contribs.append((b, _unbroadcast(-g, b.shape)))
        return contribs

    return Tensor._node(out, (a, b), bw)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data * b.data

    def bw(g):
        contribs = []
        if a.grad_tracked:
            contribs.append((a, _unbroadcast(g * b.data, a.shape)))
        if b.grad_tracked:
            contribs.append((b, _unbroadcast(g * a.data, b.shape)))
        return contribs

    return Tensor._node(out, (a, b), bw)


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data / b.data

    def bw(g):
        contribs = []
        if a.grad_tracked:
            contribs.append((a, _unbroadcast(g / b.data, a.shape)))
        if b.grad_tracked:
            contribs.append((b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape)))
        return contribs

    return Tensor._node(out, (a, b), bw)


def neg(a):
    def bw(g):
        return [(a, -g)] if a.grad_tracked else []

    return Tensor._node(-a.data, (a,), bw)


def sqrt(a):
    out = np.sqrt(a.data)

    def bw(g):
        return [(a, g * (0.5 / out))] if a.grad_tracked else []

    return Tensor._node(out, (a,), bw)


def tanh(a):
    out = np.tanh(a.data)

    def bw(g):
        return [(a, g * (1.0 - out * out))] if a.grad_tracked else []

    return Tensor._node(out, (a,), bw)


def gelu(a):
    flat = np.ascontiguousarray(a.data.ravel())
    out = K.gelu_forward(flat).reshape(a.shape)

    def bw(g):
        if not a.grad_tracked:
            return []
        dg = K.gelu_backward(flat, np.ascontiguousarray(g.ravel()))
        return [(a, dg.reshape(a.shape))]

    return Tensor._node(out, (a,), bw)


# ---------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------

def reshape(a, shape):
    shape = tuple(int(s) for s in (shape if isinstance(shape, (tuple, list)) else (shape,)))
    if int(np.prod(shape)) != a.size:
        raise ShapeError(f"cannot reshape {a.shape} to {shape}")
    out = a.data.reshape(shape)

    def bw(g):
        return [(a, g.reshape(a.shape))] if a.grad_tracked else []

    return Tensor._node(out, (a,), bw)


def transpose(a, axes=None):
    out = np.transpose(a.data, axes)
    if axes is None:
        inv = None
    else:
        inv = np.argsort(axes)

    def bw(g):
        return [(a, np.transpose(g, inv))] if a.grad_tracked else []

    return Tensor._node(out, (a,), bw)


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        pieces = np.split(g, splits, axis=axis)
        return [(t, p) for t, p in zip(tensors, pieces) if t.grad_tracked]

    return Tensor._node(out, tuple(tensors), bw)


def gather_rows(a, idx):
    """Select rows of ``a`` along axis 0: an embedding lookup."""
    idx = np.asarray(idx, dtype=np.int64)
    out = a.data[idx]

    def bw(g):
        if not a.grad_tracked:
            return []
        da = np.zeros_like(a.data)
        np.add.at(da, idx, g)
        return [(a, da)]

    return Tensor._node(out, (a,), bw)


def set_rows(base, rows, idx):
    """Copy of ``base`` with rows at ``idx`` replaced by ``rows``."""
    idx = np.asarray(idx, dtype=np.int64)
    if rows.shape != (len(idx),) + base.shape[1:]:
        raise ShapeError(
            f"set_rows: rows shape {rows.shape} does not fit {len(idx)} rows of {base.shape}"
        )
    out = base.data.copy()
    out[idx] = rows.data

    def bw(g):
        contribs = []
        if base.grad_tracked:
            db = g.copy()
            db[idx] = 0.0
            contribs.append((base, db))
        if rows.grad_tracked:
            contribs.append((rows, g[idx]))
        return contribs

    return Tensor._node(out, (base, rows), bw)


# ---------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------

def tsum(a, axis=None, keepdims=False):
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if not a.grad_tracked:
            return []
        if axis is None:
            return [(a, np.broadcast_to(g, a.shape).copy())]
        gg = g if keepdims else np.expand_dims(g, axis)
        return [(a, np.broadcast_to(gg, a.shape).copy())]

    return Tensor._node(out, (a,), bw)


def tmean(a, axis=None, keepdims=False):
    n = a.size if axis is None else a.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), Tensor(1.0 / n))


# ---------------------------------------------------------------------
# matmul
# ---------------------------------------------------------------------

def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul requires ndim >= 2, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(f"matmul batch dimensions disagree: {a.shape} @ {b.shape}") from exc

    def bw(g):
        contribs = []
        if a.grad_tracked:
            da = np.matmul(g, np.swapaxes(b.data, -1, -2))
            contribs.append((a, _unbroadcast(da, a.shape)))
        if b.grad_tracked:
            db = np.matmul(np.swapaxes(a.data, -1, -2), g)
            contribs.append((b, _unbroadcast(db, b.shape)))
        return contribs

    return Tensor._node(out, (a, b), bw)


# ---------------------------------------------------------------------
# fused neural-net ops (kernel-backed)
# ---------------------------------------------------------------------

def softmax_last(x, mask=None):
    """Softmax over the last axis; masked entries are exactly zero.

    ``mask`` is a boolean ndarray broadcastable to ``x.shape`` (True =
    keep). Raises DegenerateMaskError if any row is fully masked.
    """
    d = x.shape[-1]
    x2 = np.ascontiguousarray(x.data.reshape(-1, d))
    if mask is not None:
        m2 = np.ascontiguousarray(
            np.broadcast_to(np.asarray(mask, dtype=bool), x.shape).reshape(-1, d)
        )
        if not m2.any(axis=1).all():
            raise DegenerateMaskError("softmax row with every entry masked")
        y2 = K.masked_softmax(x2, m2.astype(np.uint8))
    else:
        y2 = K.masked_softmax(x2, None)
    out = y2.reshape(x.shape)

    def bw(g):
        if not x.grad_tracked:
            return []
        dx = K.softmax_backward(y2, np.ascontiguousarray(g.reshape(-1, d)))
        return [(x, dx.reshape(x.shape))]

    return Tensor._node(out, (x,), bw)


def layer_norm(x, gain, bias, eps=1e-5):
    """Row-wise layer norm over the last axis with affine gain/bias."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(
            f"layer_norm affine shapes {gain.shape}/{bias.shape} do not match last dim {d}"
        )
    if eps <= 0:
        raise ValueError("layer_norm eps must be positive")
    x2 = np.ascontiguousarray(x.data.reshape(-1, d))
    y2, mean, rstd = K.layer_norm_forward(x2, gain.data, bias.data, eps)
    out = y2.reshape(x.shape)

    def bw(g):
        g2 = np.ascontiguousarray(g.reshape(-1, d))
        dx2, dgain, dbias = K.layer_norm_backward(x2, gain.data, mean, rstd, g2)
        contribs = []
        if x.grad_tracked:
            contribs.append((x, dx2.reshape(x.shape)))
        if gain.grad_tracked:
            contribs.append((gain, dgain))
        if bias.grad_tracked:
            contribs.append((bias, dbias))
        return contribs

    return Tensor._node(out, (x, gain, bias), bw)


def cross_entropy_masked(logits, targets, loss_mask):
    """Mean negative log-softmax over positions where loss_mask is True.

    Masked positions contribute exactly zero to the value and gradient.
    """
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy_masked expects [T, V] logits, got {logits.shape}")
    t_count, vocab = logits.shape
    targets = np.asarray(targets, dtype=np.int64)
    loss_mask = np.asarray(loss_mask, dtype=bool)
    if targets.shape != (t_count,) or loss_mask.shape != (t_count,):
        raise ShapeError(
            f"targets/loss_mask lengths {targets.shape}/{loss_mask.shape} "
            f"do not match {t_count} positions"
        )
    if targets.min(initial=0) < 0 or targets.max(initial=0) >= vocab:
        raise ValueError(f"target ids out of range [0, {vocab})")
    if not loss_mask.any():
        raise EmptyLossError("loss_mask has no unmasked position")

    x2 = np.ascontiguousarray(logits.data)
    lse = K.logsumexp_rows(x2)
    nll = lse - x2[np.arange(t_count), targets]
    n_active = int(loss_mask.sum())
    value = float(nll[loss_mask].sum() / n_active)

    def bw(g):
        if not logits.grad_tracked:
            return []
        row_scale = np.where(loss_mask, float(g) / n_active, 0.0)
        dl = K.cross_entropy_backward(x2, lse, targets, row_scale)
        return [(logits, dl)]

    return Tensor._node(np.asarray(value), (logits,), bw)


# ---------------------------------------------------------------------
# backward engine
# ---------------------------------------------------------------------

def _topo_order(root):
    order = []
    seen = set()
    stack = [(root, False)]
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
            if p.grad_tracked and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss):
    """Accumulate dLoss/dLeaf into every tracked leaf reachable from loss.

    Repeated calls (on the same or fresh graphs) accumulate into leaf grad
    buffers; intermediate gradients are transient per call.
    """
    if loss.data.ndim != 0:
        raise RankError(f"backward requires a scalar loss, got shape {loss.shape}")
    if not loss.grad_tracked:
        raise RankError("backward requires a grad-tracked loss")
    order = _topo_order(loss)
    grads = {id(loss): np.ones((), dtype=np.float64)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward_fn is None:
            if node.grad is not None:
                node.grad += g
            continue
        for parent, contrib in node._backward_fn(g):
            key = id(parent)
            held = grads.get(key)
            grads[key] = contrib if held is None else held + contrib
