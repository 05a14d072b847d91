"""Differentiable operations.

Every op computes its forward value eagerly and, when a tape is active and
the result depends on a gradient-carrying tensor, records a closure that
maps the output gradient to input-gradient accumulations. Dtype follows the
inputs (float32 by default, float64 in verification mode); constants adopt
the dtype of the tensor they combine with.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

from ..errors import (
    DegenerateNorm,
    LabelOutOfRange,
    NonIntegralOutput,
    ShapeMismatch,
)
from .tape import Tensor, accumulate, active_tape

NORM_FLOOR = 1e-12


def as_tensor(value, like: Tensor | None = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(value), dtype=dtype)


def _pair(a, b) -> tuple[Tensor, Tensor]:
    """Wrap a binary op's operands; a bare scalar adopts the tensor's dtype."""
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    if isinstance(b, Tensor):
        return as_tensor(a, like=b), b
    return as_tensor(a), as_tensor(b)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# --- elementwise and linear ---------------------------------------------

def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = Tensor(a.data + b.data, requires_grad=a.requires_grad or b.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            accumulate(a, _unbroadcast(g, a.data.shape))
            accumulate(b, _unbroadcast(g, b.data.shape))
        tape.record(out, (a, b), bwd)
    return out


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = Tensor(a.data - b.data, requires_grad=a.requires_grad or b.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            accumulate(a, _unbroadcast(g, a.data.shape))
            accumulate(b, _unbroadcast(-g, b.data.shape))
        tape.record(out, (a, b), bwd)
    return out


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = Tensor(a.data * b.data, requires_grad=a.requires_grad or b.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            accumulate(a, _unbroadcast(g * b.data, a.data.shape))
            accumulate(b, _unbroadcast(g * a.data, b.data.shape))
        tape.record(out, (a, b), bwd)
    return out


def neg(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(-x.data, requires_grad=x.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            accumulate(x, -g)
        tape.record(out, (x,), bwd)
    return out


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatch(f"matmul {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data, requires_grad=a.requires_grad or b.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            accumulate(a, g @ b.data.T)
            accumulate(b, a.data.T @ g)
        tape.record(out, (a, b), bwd)
    return out


def transpose(x) -> Tensor:
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeMismatch(f"transpose expects a matrix, got {x.data.shape}")
    out = Tensor(x.data.T, requires_grad=x.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            accumulate(x, g.T)
        tape.record(out, (x,), bwd)
    return out


def dense(x, w, b) -> Tensor:
    """x: N x D, w: D x K, b: K -> N x K."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[0] \
            or b.data.shape != (w.data.shape[1],):
        raise ShapeMismatch(
            f"dense x{x.data.shape} w{w.data.shape} b{b.data.shape}")
    out = Tensor(x.data @ w.data + b.data,
                 requires_grad=x.requires_grad or w.requires_grad or b.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            accumulate(x, g @ w.data.T)
            accumulate(w, x.data.T @ g)
            accumulate(b, g.sum(axis=0))
        tape.record(out, (x, w, b), bwd)
    return out


def relu(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.maximum(x.data, 0), requires_grad=x.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        mask = x.data > 0
        def bwd(g):
            accumulate(x, g * mask)
        tape.record(out, (x,), bwd)
    return out


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    d = x.data
    s = np.empty_like(d)
    pos = d >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    s[~pos] = ex / (1.0 + ex)
    out = Tensor(s, requires_grad=x.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            accumulate(x, g * s * (1.0 - s))
        tape.record(out, (x,), bwd)
    return out


def exp(x) -> Tensor:
    x = as_tensor(x)
    e = np.exp(x.data)
    out = Tensor(e, requires_grad=x.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            accumulate(x, g * e)
        tape.record(out, (x,), bwd)
    return out


def log(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.log(x.data), requires_grad=x.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            accumulate(x, g / x.data)
        tape.record(out, (x,), bwd)
    return out


def sum_(x, axis: int | None = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims), requires_grad=x.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            accumulate(x, np.broadcast_to(g, x.data.shape).copy())
        tape.record(out, (x,), bwd)
    return out


def mean(x) -> Tensor:
    """Mean over all elements, producing a scalar."""
    x = as_tensor(x)
    out = Tensor(x.data.mean(), requires_grad=x.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            accumulate(x, np.broadcast_to(g / x.data.size, x.data.shape).copy())
        tape.record(out, (x,), bwd)
    return out


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in ts], axis=axis),
                 requires_grad=any(t.requires_grad for t in ts))
    tape = active_tape()
    if tape is not None and out.requires_grad:
        sizes = [t.data.shape[axis] for t in ts]
        def bwd(g):
            start = 0
            for t, size in zip(ts, sizes):
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(start, start + size)
                accumulate(t, g[tuple(idx)])
                start += size
        tape.record(out, tuple(ts), bwd)
    return out


# --- reductions over feature maps ----------------------------------------

def global_avg_pool(x) -> Tensor:
    """N x C x H x W -> N x C spatial mean."""
    x = as_tensor(x)
    if x.data.ndim != 4:
        raise ShapeMismatch(f"global_avg_pool expects 4-d input, got {x.data.shape}")
    n, c, h, w = x.data.shape
    out = Tensor(x.data.mean(axis=(2, 3)), requires_grad=x.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            gx = np.broadcast_to(g[:, :, None, None] / (h * w), x.data.shape)
            accumulate(x, np.ascontiguousarray(gx))
        tape.record(out, (x,), bwd)
    return out


def scale_channels(x, gate) -> Tensor:
    """Multiply every H x W map by its per-sample, per-channel gate."""
    x, gate = as_tensor(x), as_tensor(gate)
    if x.data.ndim != 4 or gate.data.shape != x.data.shape[:2]:
        raise ShapeMismatch(
            f"scale_channels x{x.data.shape} gate{gate.data.shape}")
    out = Tensor(x.data * gate.data[:, :, None, None],
                 requires_grad=x.requires_grad or gate.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            accumulate(x, g * gate.data[:, :, None, None])
            accumulate(gate, (g * x.data).sum(axis=(2, 3)))
        tape.record(out, (x, gate), bwd)
    return out


# --- normalization and losses ---------------------------------------------

def l2_normalize(x) -> Tensor:
    """Scale each row of an N x D matrix to unit Euclidean norm."""
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeMismatch(f"l2_normalize expects N x D, got {x.data.shape}")
    norms = np.sqrt((x.data * x.data).sum(axis=1))
    if norms.min(initial=np.inf) <= NORM_FLOOR:
        raise DegenerateNorm(f"row norm {norms.min()} at or below {NORM_FLOOR}")
    y = x.data / norms[:, None]
    out = Tensor(y, requires_grad=x.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            # d(x/|x|) = (I - y y^T)/|x| applied row-wise
            proj = (g * y).sum(axis=1, keepdims=True)
            accumulate(x, (g - y * proj) / norms[:, None])
        tape.record(out, (x,), bwd)
    return out


def row_logsumexp(x) -> Tensor:
    """Stable per-row log(sum(exp)); the max is detached, as usual."""
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeMismatch(f"row_logsumexp expects N x K, got {x.data.shape}")
    m = x.data.max(axis=1)
    lse = np.log(np.exp(x.data - m[:, None]).sum(axis=1)) + m
    out = Tensor(lse, requires_grad=x.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            accumulate(x, g[:, None] * np.exp(x.data - lse[:, None]))
        tape.record(out, (x,), bwd)
    return out


def softmax_cross_entropy(logits, labels) -> Tensor:
    """Mean cross-entropy of logits (N x K) against integer labels (N)."""
    logits = as_tensor(logits)
    y = np.asarray(labels)
    if logits.data.ndim != 2 or y.shape != (logits.data.shape[0],):
        raise ShapeMismatch(f"logits {logits.data.shape} vs labels {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        raise LabelOutOfRange(f"labels must be integers, got dtype {y.dtype}")
    n, k = logits.data.shape
    if y.size and (y.min() < 0 or y.max() >= k):
        raise LabelOutOfRange(f"labels span [{y.min()}, {y.max()}], expected [0, {k})")
    m = logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(logits.data - m).sum(axis=1, keepdims=True)) + m
    per_sample = lse[:, 0] - logits.data[np.arange(n), y]
    out = Tensor(per_sample.mean(), requires_grad=logits.requires_grad)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            p = np.exp(logits.data - lse)
            p[np.arange(n), y] -= 1.0
            accumulate(logits, g * p / n)
        tape.record(out, (logits,), bwd)
    return out


# --- convolution ----------------------------------------------------------

def conv2d(x, w, b, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlate x (N,C,H,W) with w (F,C,kH,kW) plus bias b (F)."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeMismatch(f"conv2d x{x.data.shape} w{w.data.shape}")
    n, c, h, wd = x.data.shape
    f, cw, kh, kw = w.data.shape
    if cw != c or b.data.shape != (f,):
        raise ShapeMismatch(f"conv2d x{x.data.shape} w{w.data.shape} b{b.data.shape}")
    hp, wp = h + 2 * padding, wd + 2 * padding
    if hp < kh or wp < kw:
        raise NonIntegralOutput(f"kernel {kh}x{kw} exceeds padded input {hp}x{wp}")
    if (hp - kh) % stride or (wp - kw) % stride:
        raise NonIntegralOutput(
            f"geometry ({h}+2*{padding}-{kh})/{stride} is not integral")
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    s0, s1, s2, s3 = xp.strides
    win = as_strided(xp, (n, c, ho, wo, kh, kw),
                     (s0, s1, s2 * stride, s3 * stride, s2, s3))
    val = np.tensordot(win, w.data, axes=([1, 4, 5], [1, 2, 3]))  # N,Ho,Wo,F
    val = np.ascontiguousarray(val.transpose(0, 3, 1, 2)) + b.data[None, :, None, None]
    out = Tensor(val, requires_grad=x.requires_grad or w.requires_grad or b.requires_grad)

    tape = active_tape()
    if tape is not None and out.requires_grad:
        def bwd(g):
            accumulate(b, g.sum(axis=(0, 2, 3)))
            if w.requires_grad:
                accumulate(w, np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3])))
            if x.requires_grad:
                gcols = np.tensordot(g, w.data, axes=([1], [0]))  # N,Ho,Wo,C,kH,kW
                gc = gcols.transpose(0, 3, 4, 5, 1, 2)            # N,C,kH,kW,Ho,Wo
                gxp = np.zeros_like(xp)
                for i in range(kh):
                    for j in range(kw):
                        gxp[:, :, i:i + stride * ho:stride,
                            j:j + stride * wo:stride] += gc[:, :, i, j]
                if padding:
                    accumulate(x, gxp[:, :, padding:padding + h, padding:padding + wd])
                else:
                    accumulate(x, gxp)
        tape.record(out, (x, w, b), bwd)
    return out


# --- operator sugar on Tensor ----------------------------------------------

Tensor.__add__ = add
Tensor.__radd__ = lambda self, other: add(other, self)
Tensor.__sub__ = sub
Tensor.__rsub__ = lambda self, other: sub(other, self)
Tensor.__mul__ = mul
Tensor.__rmul__ = lambda self, other: mul(other, self)
Tensor.__neg__ = neg
Tensor.__matmul__ = matmul
