"""Tape-based reverse-mode autodiff over numpy arrays.

The op set is exactly what the conditioned 3D U-Net needs: conv3d (kernel 1
or 3, stride 1 or 2), nearest-neighbor upsampling, linear maps, embedding
lookup, group normalization, silu, embedding-driven scale/shift, elementwise
add/mul, channel concat/slice, mean and mse reductions.

Ops executed inside a ``with Tape():`` block are recorded in execution
order when some input requires gradients; ``backward(loss)`` walks the tape
once in reverse and accumulates dLoss/dp into each leaf parameter's
``.grad``.  Repeated backward calls accumulate.  Training runs float32;
float64 inputs flow through unchanged for finite-difference gradient checks.
"""

from __future__ import annotations

import numpy as np

from . import _convkernels as _ck


class Tensor:
    """N-dimensional value, optionally carrying a gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_tape")

    def __init__(self, data, requires_grad=False, name=""):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __repr__(self):
        flag = ", grad" if self.requires_grad else ""
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.data.shape}, dtype={self.data.dtype}{flag})"


_TAPES: list = []


class Tape:
    """Ordered record of executed ops; reverse iteration drives backprop."""

    def __init__(self):
        self._entries = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.pop()
        return False

    def __len__(self):
        return len(self._entries)


def _active_tape():
    return _TAPES[-1] if _TAPES else None


def _emit(out_data, inputs, backward_fn):
    out = Tensor(out_data)
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._tape = tape
        tape._entries.append((out, inputs, backward_fn))
    return out


def backward(loss: Tensor) -> None:
    """Accumulate dLoss/dp into every reachable parameter's ``.grad``."""
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    tape = loss._tape
    if tape is None:
        return  # constant: nothing reachable
    grads = {id(loss): np.ones_like(loss.data)}
    owners = {id(loss): loss}
    for out, inputs, fn in reversed(tape._entries):
        g = grads.pop(id(out), None)
        owners.pop(id(out), None)
        if g is None:
            continue
        for t, gi in zip(inputs, fn(g)):
            if gi is None or not t.requires_grad:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
                owners[key] = t
    for key, g in grads.items():
        t = owners[key]
        if t.requires_grad:
            t.grad = g if t.grad is None else t.grad + g


# ---------------------------------------------------------------------------
# elementwise and shape ops


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")

    def fn(g):
        return (g if a.requires_grad else None, g if b.requires_grad else None)

    return _emit(a.data + b.data, (a, b), fn)


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):  # scalar scaling
        c = float(b)

        def fn_scalar(g):
            return (g * c,)

        return _emit(a.data * a.data.dtype.type(c), (a,), fn_scalar)

    if a.data.shape != b.data.shape:
        raise ValueError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")
    av, bv = a.data, b.data

    def fn(g):
        return (g * bv if a.requires_grad else None, g * av if b.requires_grad else None)

    return _emit(av * bv, (a, b), fn)


def concat(parts, axis=1) -> Tensor:
    parts = list(parts)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def fn(g):
        out = []
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                out.append(np.ascontiguousarray(g[tuple(idx)]))
            else:
                out.append(None)
        return tuple(out)

    return _emit(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), fn)


def slice_channels(x: Tensor, start: int, stop: int) -> Tensor:
    """View of channels [start, stop) along axis 1, as a gradient-aware op."""
    if not 0 <= start < stop <= x.data.shape[1]:
        raise ValueError(f"bad channel slice [{start}, {stop}) for shape {x.data.shape}")

    def fn(g):
        gx = np.zeros_like(x.data)
        gx[:, start:stop] = g
        return (gx,)

    return _emit(np.ascontiguousarray(x.data[:, start:stop]), (x,), fn)


def silu(x: Tensor) -> Tensor:
    xv = x.data
    sig = 1.0 / (1.0 + np.exp(-xv))
    sig = sig.astype(xv.dtype, copy=False)

    def fn(g):
        return (g * (sig * (1.0 + xv * (1.0 - sig))),)

    return _emit(xv * sig, (x,), fn)


# ---------------------------------------------------------------------------
# linear algebra ops


def linear(x: Tensor, w: Tensor, b=None) -> Tensor:
    """y = x @ w.T + b with x (N, F_in), w (F_out, F_in), b (F_out)."""
    xv, wv = x.data, w.data
    if xv.ndim != 2 or wv.ndim != 2 or xv.shape[1] != wv.shape[1]:
        raise ValueError(f"linear shape mismatch: x {xv.shape}, w {wv.shape}")
    out = xv @ wv.T
    inputs = (x, w) if b is None else (x, w, b)
    if b is not None:
        out = out + b.data

    def fn(g):
        gx = g @ wv if x.requires_grad else None
        gw = g.T @ xv if w.requires_grad else None
        if b is None:
            return (gx, gw)
        gb = g.sum(axis=0) if b.requires_grad else None
        return (gx, gw, gb)

    return _emit(out, inputs, fn)


def embed(table: Tensor, ids) -> Tensor:
    """Row lookup: out[i] = table[ids[i]]."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1 or ids.min(initial=0) < 0 or ids.max(initial=0) >= table.data.shape[0]:
        raise ValueError(f"bad embedding ids {ids} for table {table.data.shape}")

    def fn(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return _emit(table.data[ids], (table,), fn)


# ---------------------------------------------------------------------------
# convolution and resampling


def _pad1(a):
    return np.pad(a, ((0, 0), (0, 0), (1, 1), (1, 1), (1, 1)))


def conv3d(x: Tensor, w: Tensor, b=None, stride: int = 1) -> Tensor:
    """3D convolution, kernel 1 (pointwise) or 3 (padding 1), stride 1 or 2."""
    xv, wv = x.data, w.data
    if xv.ndim != 5 or wv.ndim != 5:
        raise ValueError(f"conv3d expects 5D tensors, got x {xv.shape}, w {wv.shape}")
    n, c, d, h, ww_ = xv.shape
    o, ci, k = wv.shape[0], wv.shape[1], wv.shape[2]
    if ci != c or wv.shape[2:] != (k, k, k) or k not in (1, 3):
        raise ValueError(f"conv3d shape mismatch: x {xv.shape}, w {wv.shape}")
    if stride not in (1, 2) or (k == 1 and stride != 1):
        raise ValueError(f"unsupported conv3d stride {stride} for kernel {k}")
    bv = None if b is None else b.data
    inputs = (x, w) if b is None else (x, w, b)

    if k == 1:
        w2 = wv.reshape(o, c)
        out = np.matmul(w2, xv.reshape(n, c, -1)).reshape(n, o, d, h, ww_)
        if bv is not None:
            out += bv.reshape(1, o, 1, 1, 1)

        def fn1(g):
            g2 = g.reshape(n, o, -1)
            gx = None
            if x.requires_grad:
                gx = np.matmul(w2.T, g2).reshape(xv.shape)
            gw = None
            if w.requires_grad:
                gw = np.einsum("nol,ncl->oc", g2, xv.reshape(n, c, -1)).reshape(wv.shape)
            if b is None:
                return (gx, gw)
            gb = g.sum(axis=(0, 2, 3, 4)) if b.requires_grad else None
            return (gx, gw, gb)

        return _emit(out, inputs, fn1)

    if stride == 2 and (d % 2 or h % 2 or ww_ % 2):
        raise ValueError(f"stride-2 conv3d needs even dims, got {xv.shape[2:]}")
    xp = _pad1(xv)
    bz = bv if bv is not None else np.zeros(o, dtype=xv.dtype)
    if stride == 1:
        out = np.empty((n, o, d, h, ww_), dtype=xv.dtype)
        _ck.conv_s1(xp, wv, bz, out)
    else:
        out = np.empty((n, o, d // 2, h // 2, ww_ // 2), dtype=xv.dtype)
        _ck.conv_s2(xp, wv, bz, out)

    def fn3(g):
        g = np.ascontiguousarray(g)
        gx = gw = gb = None
        if b is not None and b.requires_grad:
            gb = g.sum(axis=(0, 2, 3, 4))
        if w.requires_grad:
            gw = np.zeros_like(wv)
            if stride == 1:
                _ck.grad_w_s1(xp, g, gw)
            else:
                _ck.grad_w_s2(xp, g, gw)
        if x.requires_grad:
            # grad wrt input = stride-1 conv of the (zero-stuffed) output grad
            # with the spatially flipped, channel-transposed weights
            wt = np.ascontiguousarray(wv[:, :, ::-1, ::-1, ::-1].transpose(1, 0, 2, 3, 4))
            if stride == 2:
                gu = np.zeros(xv.shape[:1] + (o,) + xv.shape[2:], dtype=g.dtype)
                gu[:, :, ::2, ::2, ::2] = g
                g = gu
            gx = np.empty_like(xv)
            _ck.conv_s1(_pad1(g), wt, np.zeros(c, dtype=xv.dtype), gx)
        if b is None:
            return (gx, gw)
        return (gx, gw, gb)

    return _emit(out, inputs, fn3)


def upsample_nearest2(x: Tensor) -> Tensor:
    """Nearest-neighbor 2x upsampling along all three spatial axes."""
    xv = x.data
    n, c, d, h, w = xv.shape
    out = np.broadcast_to(
        xv[:, :, :, None, :, None, :, None], (n, c, d, 2, h, 2, w, 2)
    ).reshape(n, c, 2 * d, 2 * h, 2 * w)

    def fn(g):
        return (g.reshape(n, c, d, 2, h, 2, w, 2).sum(axis=(3, 5, 7)),)

    return _emit(np.ascontiguousarray(out), (x,), fn)


# ---------------------------------------------------------------------------
# normalization and modulation


def group_norm(x: Tensor, groups: int, eps: float = 1e-5) -> Tensor:
    """Per-group standardization over (channels/groups, spatial), no affine."""
    xv = x.data
    n, c = xv.shape[:2]
    if c % groups:
        raise ValueError(f"groups {groups} do not divide channels {c}")
    grouped = xv.reshape(n, groups, -1)
    mu = grouped.mean(axis=2, keepdims=True)
    var = grouped.var(axis=2, keepdims=True)
    inv_std = (1.0 / np.sqrt(var + eps)).astype(xv.dtype, copy=False)
    xhat = (grouped - mu) * inv_std
    m = grouped.shape[2]

    def fn(g):
        gg = g.reshape(n, groups, -1)
        gmean = gg.mean(axis=2, keepdims=True)
        xmean = (gg * xhat).mean(axis=2, keepdims=True)
        gx = inv_std * (gg - gmean - xhat * xmean)
        return (gx.reshape(xv.shape),)

    _ = m
    return _emit(xhat.reshape(xv.shape), (x,), fn)


def scale_shift(x: Tensor, s: Tensor, b: Tensor) -> Tensor:
    """x * (1 + s) + b with s, b of shape (N, C) broadcast over space."""
    xv, sv, bv = x.data, s.data, b.data
    n, c = xv.shape[:2]
    if sv.shape != (n, c) or bv.shape != (n, c):
        raise ValueError(f"scale_shift expects (N, C) modulation, got {sv.shape}/{bv.shape}")
    spatial = (1,) * (xv.ndim - 2)
    gain = (1.0 + sv).reshape((n, c) + spatial).astype(xv.dtype, copy=False)
    out = xv * gain + bv.reshape((n, c) + spatial)
    axes = tuple(range(2, xv.ndim))

    def fn(g):
        gx = g * gain if x.requires_grad else None
        gs = (g * xv).sum(axis=axes) if s.requires_grad else None
        gb = g.sum(axis=axes) if b.requires_grad else None
        return (gx, gs, gb)

    return _emit(out, (x, s, b), fn)


# ---------------------------------------------------------------------------
# reductions


def mean(x: Tensor) -> Tensor:
    xv = x.data
    inv = 1.0 / xv.size

    def fn(g):
        return (np.full(xv.shape, g * inv, dtype=xv.dtype),)

    return _emit(np.asarray(xv.mean(), dtype=xv.dtype), (x,), fn)


def mse(x: Tensor, y: Tensor) -> Tensor:
    if x.data.shape != y.data.shape:
        raise ValueError(f"mse shape mismatch: {x.data.shape} vs {y.data.shape}")
    diff = x.data - y.data
    inv = 2.0 / diff.size

    def fn(g):
        gd = (g * inv) * diff
        return (gd if x.requires_grad else None, -gd if y.requires_grad else None)

    return _emit(np.asarray((diff * diff).mean(), dtype=diff.dtype), (x, y), fn)


# ---------------------------------------------------------------------------
# optimization


class AdamW:
    """Bias-corrected Adam with decoupled weight decay (p -= lr*wd*p after)."""

    def __init__(self, params, lr=1e-5, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1, self.beta2 = float(betas[0]), float(betas[1])
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p in self.params:
            if p.grad is None:
                raise ValueError(f"adamw: missing grad for parameter {p.name!r}")
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            if self.weight_decay:
                p.data -= self.lr * self.weight_decay * p.data

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def load_state(self, step_count, m_list, v_list) -> None:
        if len(m_list) != len(self.params) or len(v_list) != len(self.params):
            raise ValueError("adamw: state size does not match parameter count")
        self.step_count = int(step_count)
        self.m = [np.array(m, copy=True) for m in m_list]
        self.v = [np.array(v, copy=True) for v in v_list]


def clip_grad_norm(params, max_norm: float = 1.0) -> float:
    """Scale all grads so their global L2 norm is at most max_norm.

    Returns the pre-clip norm.
    """
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.square(p.grad, dtype=np.float64).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= p.grad.dtype.type(scale)
    return norm
