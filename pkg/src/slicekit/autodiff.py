"""Minimal reverse-mode autodiff over float64 numpy arrays.

A :class:`Recording` is an append-only tape of op records in creation
order.  While a recording is active (``with record(rec):``) every op
appends the arrays and closure needed for its backward rule; outside a
recording ops just compute values, which is the inference path.

``Recording.backward(loss)`` walks the tape once in reverse creation
order and **accumulates** (adds) into each leaf tensor's ``grad`` slot.
Calling it twice therefore doubles the gradients; the trainer relies on
this to sum gradients over several subnet forward passes before a
single optimizer update.

The op set is deliberately small: matmul, conv2d, a handful of
elementwise functions, prefix/narrow slicing (the mechanism behind
width slicing), group normalization, pooling, and a fused
softmax-cross-entropy loss.  Broadcasting is restricted to full-shape
operands, scalars, and the dedicated bias-add op, which keeps every
backward rule short enough to audit by eye.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from . import _kernels
from .errors import ConfigError, DataError, ShapeError, UsageError

__all__ = [
    "Tensor",
    "Recording",
    "record",
    "active_recording",
    "matmul",
    "transpose",
    "conv2d",
    "relu",
    "sigmoid",
    "tanh",
    "add",
    "mul",
    "scale",
    "add_bias",
    "narrow",
    "gate_rows",
    "group_norm",
    "softmax_cross_entropy",
    "sum_all",
    "reshape",
    "maxpool2x2",
    "global_avg_pool",
]


class Tensor:
    """Dense float64 array plus an optional gradient slot."""

    __slots__ = ("data", "grad", "name")

    def __init__(self, data, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.size == 0:
            raise ShapeError(f"zero-size tensor (shape {arr.shape}) rejected")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def values(self) -> np.ndarray:
        """Flat row-major view of the stored values."""
        return self.data.reshape(-1)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def ensure_grad(self) -> np.ndarray:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        return self.grad

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape})"

    # small operator sugar; the named functions remain the primary API
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


class _Record:
    __slots__ = ("out_id", "in_ids", "backward_fn")

    def __init__(self, out_id, in_ids, backward_fn):
        self.out_id = out_id
        self.in_ids = in_ids
        self.backward_fn = backward_fn


class Recording:
    """Append-only tape; single-writer, one logical thread."""

    def __init__(self):
        self._records: list[_Record] = []
        self._ids: dict[int, int] = {}  # id(tensor) -> node id
        self._tensors: dict[int, Tensor] = {}  # node id -> tensor (strong ref)
        self._produced: set[int] = set()  # node ids that are op outputs
        self._next = 0

    def __len__(self) -> int:
        return len(self._records)

    def node_id(self, t: Tensor) -> int | None:
        return self._ids.get(id(t))

    def _attach(self, t: Tensor) -> int:
        nid = self._ids.get(id(t))
        if nid is None:
            nid = self._next
            self._next += 1
            self._ids[id(t)] = nid
            self._tensors[nid] = t
        return nid

    def add(self, out: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> None:
        in_ids = tuple(self._attach(t) for t in inputs)
        out_id = self._attach(out)
        self._produced.add(out_id)
        self._records.append(_Record(out_id, in_ids, backward_fn))

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into every leaf tensor's grad."""
        loss_id = self._ids.get(id(loss))
        if loss_id is None or loss_id not in self._produced:
            raise UsageError("backward: loss tensor does not belong to this recording")
        if loss.data.size != 1:
            raise ShapeError(f"backward: loss must be scalar, got shape {loss.data.shape}")
        adjoint: dict[int, np.ndarray] = {loss_id: np.ones_like(loss.data)}
        for rec in reversed(self._records):
            g = adjoint.pop(rec.out_id, None)
            if g is None:
                continue  # this record does not feed the loss
            for in_id, gin in zip(rec.in_ids, rec.backward_fn(g)):
                if gin is None:
                    continue
                acc = adjoint.get(in_id)
                if acc is None:
                    adjoint[in_id] = gin
                else:
                    acc += gin
        for nid, g in adjoint.items():
            if nid in self._produced:
                continue  # popped entries were consumed; leftovers are leaves
            t = self._tensors[nid]
            t.ensure_grad()
            t.grad += g


_ACTIVE: Recording | None = None


@contextmanager
def record(recording: Recording):
    """Make ``recording`` the active tape inside the with-block."""
    global _ACTIVE
    if _ACTIVE is not None:
        raise UsageError("nested recordings are not supported")
    _ACTIVE = recording
    try:
        yield recording
    finally:
        _ACTIVE = None


def active_recording() -> Recording | None:
    return _ACTIVE


def _t(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _emit(out: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    if _ACTIVE is not None:
        _ACTIVE.add(out, inputs, backward_fn)
    return out


# ---------------------------------------------------------------- linear ops

def matmul(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} x {b.shape}")
    out = Tensor(a.data @ b.data)
    A, B = a.data, b.data

    def bwd(g):
        return g @ B.T, A.T @ g

    return _emit(out, (a, b), bwd)


def transpose(a) -> Tensor:
    a = _t(a)
    if a.data.ndim != 2:
        raise ShapeError(f"transpose: expected 2-D, got shape {a.shape}")
    out = Tensor(np.ascontiguousarray(a.data.T))

    def bwd(g):
        return (np.ascontiguousarray(g.T),)

    return _emit(out, (a,), bwd)


def conv2d(x, k, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Batched 2-D cross-correlation: (B,M,H,W) * (N,M,k,k) -> (B,N,H',W')."""
    x, k = _t(x), _t(k)
    if x.data.ndim != 4 or k.data.ndim != 4:
        raise ShapeError(f"conv2d: need 4-D input and kernels, got {x.shape} and {k.shape}")
    bsz, m, h, w = x.shape
    n, mk, kh, kw = k.shape
    if mk != m:
        raise ShapeError(f"conv2d: input has {m} channels but kernels expect {mk}")
    if kh != kw or kh % 2 == 0:
        raise ConfigError(f"conv2d: kernels must be square with odd extent, got {kh}x{kw}")
    if (h + 2 * padding - kh) % stride or (w + 2 * padding - kw) % stride:
        raise ConfigError(
            f"conv2d: non-integral output extent for input {h}x{w}, "
            f"kernel {kh}, stride {stride}, padding {padding}"
        )
    y = _kernels.conv2d_forward(x.data, k.data, stride, padding)
    inputs = [x, k]
    if bias is not None:
        bias = _t(bias)
        if bias.shape != (n,):
            raise ShapeError(f"conv2d: bias shape {bias.shape} != ({n},)")
        y = y + bias.data[None, :, None, None]
        inputs.append(bias)
    out = Tensor(y)
    xd, kd = x.data, k.data
    x_shape, k_shape = x.shape, k.shape

    def bwd(g):
        g = np.ascontiguousarray(g)
        gx = _kernels.conv2d_grad_input(g, kd, x_shape, stride, padding)
        gk = _kernels.conv2d_grad_kernels(g, xd, k_shape, stride, padding)
        if bias is None:
            return gx, gk
        return gx, gk, g.sum(axis=(0, 2, 3))

    return _emit(out, tuple(inputs), bwd)


# ----------------------------------------------------------- elementwise ops

def relu(x) -> Tensor:
    x = _t(x)
    out = Tensor(np.maximum(x.data, 0.0))
    mask = x.data > 0

    def bwd(g):
        return (g * mask,)

    return _emit(out, (x,), bwd)


def sigmoid(x) -> Tensor:
    x = _t(x)
    s = 1.0 / (1.0 + np.exp(-x.data))
    out = Tensor(s)

    def bwd(g):
        return (g * s * (1.0 - s),)

    return _emit(out, (x,), bwd)


def tanh(x) -> Tensor:
    x = _t(x)
    th = np.tanh(x.data)
    out = Tensor(th)

    def bwd(g):
        return (g * (1.0 - th * th),)

    return _emit(out, (x,), bwd)


def _binary_shapes(a: Tensor, b: Tensor, opname: str) -> None:
    if a.shape == b.shape:
        return
    if a.data.size == 1 or b.data.size == 1:
        return  # scalar broadcast
    raise ShapeError(f"{opname}: shapes {a.shape} and {b.shape} differ (only full-shape or scalar broadcast)")


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    return g.sum().reshape(shape)  # scalar operand


def add(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    _binary_shapes(a, b, "add")
    out = Tensor(a.data + b.data)
    sa, sb = a.shape, b.shape

    def bwd(g):
        return _reduce_to(g, sa), _reduce_to(g, sb)

    return _emit(out, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    _binary_shapes(a, b, "mul")
    out = Tensor(a.data * b.data)
    ad, bd = a.data, b.data
    sa, sb = a.shape, b.shape

    def bwd(g):
        return _reduce_to(g * bd, sa), _reduce_to(g * ad, sb)

    return _emit(out, (a, b), bwd)


def scale(x, c: float) -> Tensor:
    """Multiply by a python constant (not differentiated w.r.t. c)."""
    x = _t(x)
    c = float(c)
    out = Tensor(x.data * c)

    def bwd(g):
        return (g * c,)

    return _emit(out, (x,), bwd)


def add_bias(x, b) -> Tensor:
    """x[..., n] + b[n]; the one sanctioned broadcast beyond scalars."""
    x, b = _t(x), _t(b)
    if b.data.ndim != 1 or x.shape[-1] != b.shape[0]:
        raise ShapeError(f"add_bias: input {x.shape} vs bias {b.shape}")
    out = Tensor(x.data + b.data)
    lead = tuple(range(x.data.ndim - 1))

    def bwd(g):
        return g, g.sum(axis=lead)

    return _emit(out, (x, b), bwd)


# ------------------------------------------------------------- slicing ops

def narrow(x, axis: int, start: int, length: int) -> Tensor:
    """Contiguous sub-range along one axis; backward scatters into zeros.

    This is the op behind width slicing: the forward pass reads only the
    selected range (so poisoned values outside it never propagate) and
    the backward pass writes only into it (gradient locality).
    """
    x = _t(x)
    if not 0 <= axis < x.data.ndim:
        raise ShapeError(f"narrow: axis {axis} out of range for shape {x.shape}")
    if length <= 0 or start < 0 or start + length > x.shape[axis]:
        raise ShapeError(
            f"narrow: range [{start}, {start + length}) invalid for axis {axis} of shape {x.shape}"
        )
    idx = tuple(
        slice(start, start + length) if d == axis else slice(None) for d in range(x.data.ndim)
    )
    out = Tensor(np.ascontiguousarray(x.data[idx]))
    full_shape = x.shape

    def bwd(g):
        gx = np.zeros(full_shape, dtype=np.float64)
        gx[idx] = g
        return (gx,)

    return _emit(out, (x,), bwd)


def gate_rows(x, sections: int, section_size: int, keep: int) -> Tensor:
    """Per-section leading rows: x[s*size : s*size+keep] for each section.

    Used by the recurrent layer, whose stacked gate axis holds ``sections``
    blocks of ``section_size`` rows each; slicing keeps the first ``keep``
    rows of every block as one contiguous result.
    """
    x = _t(x)
    if x.shape[0] != sections * section_size:
        raise ShapeError(
            f"gate_rows: leading extent {x.shape[0]} != {sections} x {section_size}"
        )
    if not 0 < keep <= section_size:
        raise ShapeError(f"gate_rows: keep={keep} outside (0, {section_size}]")
    rows = np.concatenate(
        [np.arange(s * section_size, s * section_size + keep) for s in range(sections)]
    )
    out = Tensor(np.ascontiguousarray(x.data[rows]))
    full_shape = x.shape

    def bwd(g):
        gx = np.zeros(full_shape, dtype=np.float64)
        gx[rows] = g
        return (gx,)

    return _emit(out, (x,), bwd)


# ------------------------------------------------------------ normalization

def group_norm(x, gamma, beta, group_size: int, eps: float = 1e-5) -> Tensor:
    """Normalize each contiguous channel group per sample, then affine.

    x is (B, C) or (B, C, H, W); gamma/beta are (C,).  Statistics are
    taken over the group's channels and any spatial extent, per sample,
    so a channel's normalized value depends only on its own group.
    """
    x, gamma, beta = _t(x), _t(gamma), _t(beta)
    if x.data.ndim not in (2, 4):
        raise ShapeError(f"group_norm: expected (B,C) or (B,C,H,W), got {x.shape}")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"group_norm: affine shapes {gamma.shape}/{beta.shape} != ({c},)")
    if group_size <= 0 or c % group_size:
        raise ConfigError(f"group_norm: width {c} not divisible by group size {group_size}")
    if eps <= 0:
        raise ConfigError(f"group_norm: eps must be positive, got {eps}")
    bsz = x.shape[0]
    groups = c // group_size
    spatial = int(np.prod(x.shape[2:])) if x.data.ndim == 4 else 1

    xg = x.data.reshape(bsz, groups, group_size * spatial)
    mean = xg.mean(axis=2, keepdims=True)
    var = xg.var(axis=2, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (xg - mean) * inv_std  # (B, G, gs*S)

    gamma_g = gamma.data.reshape(groups, group_size, 1)
    beta_g = beta.data.reshape(groups, group_size, 1)
    y = xhat.reshape(bsz, groups, group_size, spatial) * gamma_g + beta_g
    out = Tensor(y.reshape(x.shape))

    n = group_size * spatial
    x_shape = x.shape

    def bwd(g):
        gq = g.reshape(bsz, groups, group_size, spatial)
        xh = xhat.reshape(bsz, groups, group_size, spatial)
        dgamma = (gq * xh).sum(axis=(0, 3)).reshape(-1)
        dbeta = gq.sum(axis=(0, 3)).reshape(-1)
        ghat = (gq * gamma_g).reshape(bsz, groups, n)
        xh2 = xhat
        m1 = ghat.mean(axis=2, keepdims=True)
        m2 = (ghat * xh2).mean(axis=2, keepdims=True)
        dx = inv_std * (ghat - m1 - xh2 * m2)
        return dx.reshape(x_shape), dgamma, dbeta

    return _emit(out, (x, gamma, beta), bwd)


# ------------------------------------------------------------------ pooling

def maxpool2x2(x) -> Tensor:
    x = _t(x)
    if x.data.ndim != 4:
        raise ShapeError(f"maxpool2x2: expected (B,C,H,W), got {x.shape}")
    bsz, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2x2: extents must be even, got {h}x{w}")
    win = x.data.reshape(bsz, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(bsz, c, h // 2, w // 2, 4)
    arg = win.argmax(axis=4)  # ties: lowest window index, deterministic
    out = Tensor(np.take_along_axis(win, arg[..., None], axis=4)[..., 0])

    def bwd(g):
        gw = np.zeros((bsz, c, h // 2, w // 2, 4), dtype=np.float64)
        np.put_along_axis(gw, arg[..., None], g[..., None], axis=4)
        gw = gw.reshape(bsz, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return (np.ascontiguousarray(gw.reshape(bsz, c, h, w)),)

    return _emit(out, (x,), bwd)


def global_avg_pool(x) -> Tensor:
    x = _t(x)
    if x.data.ndim != 4:
        raise ShapeError(f"global_avg_pool: expected (B,C,H,W), got {x.shape}")
    bsz, c, h, w = x.shape
    out = Tensor(x.data.mean(axis=(2, 3)))

    def bwd(g):
        gx = np.broadcast_to(g[:, :, None, None] / (h * w), (bsz, c, h, w))
        return (np.ascontiguousarray(gx),)

    return _emit(out, (x,), bwd)


# ------------------------------------------------------------- reductions

def reshape(x, shape) -> Tensor:
    x = _t(x)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != x.data.size:
        raise ShapeError(f"reshape: cannot view {x.shape} as {shape}")
    out = Tensor(x.data.reshape(shape))
    orig = x.shape

    def bwd(g):
        return (g.reshape(orig),)

    return _emit(out, (x,), bwd)


def sum_all(x) -> Tensor:
    x = _t(x)
    out = Tensor(x.data.sum())
    shape = x.shape

    def bwd(g):
        return (np.full(shape, float(g), dtype=np.float64),)

    return _emit(out, (x,), bwd)


def softmax_cross_entropy(logits, labels) -> Tensor:
    """Mean negative log-likelihood of integer labels under softmax(logits).

    logits: (B, C); labels: (B,) ints in [0, C).  Returns a scalar; the
    backward rule is the textbook (softmax - onehot) / B.
    """
    logits = _t(logits)
    labels = np.asarray(labels)
    if logits.data.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy: logits must be 2-D, got {logits.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise DataError(f"softmax_cross_entropy: labels must be integers, got {labels.dtype}")
    bsz, c = logits.shape
    if labels.shape != (bsz,):
        raise ShapeError(f"softmax_cross_entropy: labels shape {labels.shape} != ({bsz},)")
    if labels.min() < 0 or labels.max() >= c:
        raise DataError(f"softmax_cross_entropy: labels outside [0, {c})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    nll = lse[:, 0] - z[np.arange(bsz), labels]
    out = Tensor(nll.mean())
    softmax = np.exp(z - lse)

    def bwd(g):
        gl = softmax.copy()
        gl[np.arange(bsz), labels] -= 1.0
        gl *= float(g) / bsz
        return (gl,)

    return _emit(out, (logits,), bwd)
