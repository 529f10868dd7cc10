"""Differentiable primitives.

Image tensors are channels-last: ``(batch, height, width, channels)``.
Every primitive keeps the floating dtype of its first input.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from cebed.autodiff.tensor import Tensor, as_tensor, record


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _wrap(x, like: Tensor | None = None) -> Tensor:
    return as_tensor(x, like.dtype if like is not None else None)


# elementwise and shape plumbing -------------------------------------------


def add(a, b) -> Tensor:
    a = _wrap(a)
    b = _wrap(b, a)
    out = Tensor(a.data + b.data, dtype=a.dtype)
    return record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def residual_add(x: Tensor, skip: Tensor) -> Tensor:
    if x.shape != skip.shape:
        raise ValueError(f"residual shapes differ: {x.shape} vs {skip.shape}")
    return add(x, skip)


def mul(a, b) -> Tensor:
    a = _wrap(a)
    b = _wrap(b, a)
    out = Tensor(a.data * b.data, dtype=a.dtype)
    return record(out, (a, b), lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.data * a.dtype.type(c), dtype=a.dtype)
    return record(out, (a,), lambda g: (g * a.dtype.type(c),))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched ``a @ b`` over the last two axes (equal batch shapes)."""
    if a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data, dtype=a.dtype)
    return record(
        out, (a, b), lambda g: (g @ np.swapaxes(b.data, -1, -2), np.swapaxes(a.data, -1, -2) @ g)
    )


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape), dtype=a.dtype)
    return record(out, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = Tensor(np.transpose(a.data, axes), dtype=a.dtype)
    return record(out, (a,), lambda g: (np.transpose(g, inverse),))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = Tensor(x.data * mask, dtype=x.dtype)
    return record(out, (x,), lambda g: (g * mask,))


# layers -------------------------------------------------------------------


def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x[..., in] @ weight[in, out] + bias[out]``."""
    if x.shape[-1] != weight.shape[0]:
        raise ValueError(f"dense: input features {x.shape[-1]} != weight rows {weight.shape[0]}")
    if bias is not None and bias.shape != (weight.shape[1],):
        raise ValueError(f"dense: bias shape {bias.shape} != ({weight.shape[1]},)")
    flat = x.data.reshape(-1, x.shape[-1])
    y = flat @ weight.data
    if bias is not None:
        y = y + bias.data
    out = Tensor(y.reshape(x.shape[:-1] + (weight.shape[1],)), dtype=x.dtype)

    def backward(g):
        g2 = g.reshape(-1, weight.shape[1])
        gx = (g2 @ weight.data.T).reshape(x.shape)
        gw = flat.T @ g2
        gb = g2.sum(axis=0) if bias is not None else None
        return gx, gw, gb

    return record(out, (x, weight, bias), backward)


def _same_pads(k: int) -> tuple[int, int]:
    before = (k - 1) // 2
    return before, k - 1 - before


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor | None = None) -> Tensor:
    """Stride-1 convolution with zero "same" padding.

    ``x``: ``(B, H, W, C_in)``; ``kernel``: ``(kh, kw, C_in, C_out)``.
    """
    if x.ndim != 4 or kernel.ndim != 4 or x.shape[3] != kernel.shape[2]:
        raise ValueError(f"conv2d shape mismatch: input {x.shape}, kernel {kernel.shape}")
    kh, kw, cin, cout = kernel.shape
    B, H, W, _ = x.shape
    (pt, pb), (pl, pr) = _same_pads(kh), _same_pads(kw)
    xp = np.pad(x.data, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    y = np.zeros((B * H * W, cout), dtype=x.dtype)
    for dy in range(kh):
        for dx in range(kw):
            y += xp[:, dy : dy + H, dx : dx + W, :].reshape(-1, cin) @ kernel.data[dy, dx]
    if bias is not None:
        y += bias.data
    out = Tensor(y.reshape(B, H, W, cout), dtype=x.dtype)

    def backward(g):
        gxp = np.zeros_like(xp)
        gk = np.empty_like(kernel.data)
        g2 = g.reshape(-1, cout)
        for dy in range(kh):
            for dx in range(kw):
                window = xp[:, dy : dy + H, dx : dx + W, :]
                gk[dy, dx] = window.reshape(-1, cin).T @ g2
                gxp[:, dy : dy + H, dx : dx + W, :] += (g2 @ kernel.data[dy, dx].T).reshape(B, H, W, cin)
        gx = gxp[:, pt : pt + H, pl : pl + W, :]
        gb = g2.sum(axis=0) if bias is not None else None
        return gx, gk, gb

    return record(out, (x, kernel, bias), backward)


def conv2d_transpose(x: Tensor, kernel: Tensor, bias: Tensor | None = None, *, stride) -> Tensor:
    """Transposed convolution upsampling ``(H, W)`` to ``(H*sh, W*sw)``.

    The full ``((H-1)*sh + kh)`` output is cropped symmetrically, starting
    at ``(kh - sh) // 2``; requires ``kh >= sh`` and ``kw >= sw``.
    """
    sh, sw = (stride, stride) if np.isscalar(stride) else tuple(stride)
    if x.ndim != 4 or kernel.ndim != 4 or x.shape[3] != kernel.shape[2]:
        raise ValueError(f"conv2d_transpose shape mismatch: input {x.shape}, kernel {kernel.shape}")
    kh, kw, cin, cout = kernel.shape
    if kh < sh or kw < sw or sh < 1 or sw < 1:
        raise ValueError(f"kernel {kh}x{kw} smaller than stride {sh}x{sw}")
    B, H, W, _ = x.shape
    full = np.zeros((B, (H - 1) * sh + kh, (W - 1) * sw + kw, cout), dtype=x.dtype)
    flat_x = x.data.reshape(-1, cin)
    for dy in range(kh):
        for dx in range(kw):
            part = (flat_x @ kernel.data[dy, dx]).reshape(B, H, W, cout)
            full[:, dy : dy + (H - 1) * sh + 1 : sh, dx : dx + (W - 1) * sw + 1 : sw, :] += part
    oy, ox = (kh - sh) // 2, (kw - sw) // 2
    y = full[:, oy : oy + H * sh, ox : ox + W * sw, :]
    if bias is not None:
        y = y + bias.data
    out = Tensor(np.ascontiguousarray(y), dtype=x.dtype)

    def backward(g):
        gfull = np.zeros_like(full)
        gfull[:, oy : oy + H * sh, ox : ox + W * sw, :] = g
        gx = np.zeros((B * H * W, cin), dtype=x.dtype)
        gk = np.empty_like(kernel.data)
        for dy in range(kh):
            for dx in range(kw):
                gs = gfull[:, dy : dy + (H - 1) * sh + 1 : sh, dx : dx + (W - 1) * sw + 1 : sw, :].reshape(-1, cout)
                gx += gs @ kernel.data[dy, dx].T
                gk[dy, dx] = flat_x.T @ gs
        gx = gx.reshape(x.shape)
        gb = g.reshape(-1, cout).sum(axis=0) if bias is not None else None
        return gx, gk, gb

    return record(out, (x, kernel, bias), backward)


@lru_cache(maxsize=128)
def bilinear_matrix(n_in: int, n_out: int) -> np.ndarray:
    """``n_out x n_in`` linear interpolation weights, half-pixel centres,
    edge values clamped."""
    m = np.zeros((n_out, n_in))
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    np.add.at(m, (np.arange(n_out), lo), 1.0 - frac)
    np.add.at(m, (np.arange(n_out), hi), frac)
    m.setflags(write=False)
    return m


def bilinear_upsample(x: Tensor, size) -> Tensor:
    """Resize ``(B, H, W, C)`` to ``(B, *size, C)`` bilinearly."""
    if x.ndim != 4:
        raise ValueError(f"bilinear_upsample expects (B, H, W, C), got {x.shape}")
    ho, wo = size
    a_h = bilinear_matrix(x.shape[1], ho).astype(x.dtype)
    a_w = bilinear_matrix(x.shape[2], wo).astype(x.dtype)
    y = np.einsum("ph,bhwc->bpwc", a_h, x.data)
    y = np.einsum("qw,bpwc->bpqc", a_w, y)
    out = Tensor(y, dtype=x.dtype)

    def backward(g):
        gx = np.einsum("qw,bpqc->bpwc", a_w, g)
        return (np.einsum("ph,bpwc->bhwc", a_h, gx),)

    return record(out, (x,), backward)


def layer_norm(x: Tensor, gamma: Tensor | None = None, beta: Tensor | None = None, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then apply ``gamma * xhat + beta``."""
    n = x.shape[-1]
    if gamma is not None and gamma.shape != (n,):
        raise ValueError(f"layer_norm: gamma shape {gamma.shape} != ({n},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    centred = x.data - mu
    inv = 1.0 / np.sqrt((centred**2).mean(axis=-1, keepdims=True) + eps)
    xhat = centred * inv
    y = xhat
    if gamma is not None:
        y = y * gamma.data
    if beta is not None:
        y = y + beta.data
    out = Tensor(y, dtype=x.dtype)

    def backward(g):
        dxhat = g * gamma.data if gamma is not None else g
        gx = inv / n * (n * dxhat - dxhat.sum(-1, keepdims=True) - xhat * (dxhat * xhat).sum(-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        gg = (g * xhat).sum(axis=lead) if gamma is not None else None
        gb = g.sum(axis=lead) if beta is not None else None
        return gx, gg, gb

    return record(out, (x, gamma, beta), backward)


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis."""
    s = _softmax(x.data)
    out = Tensor(s, dtype=x.dtype)
    return record(out, (x,), lambda g: (s * (g - (g * s).sum(axis=-1, keepdims=True)),))


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """``softmax(q k^T / sqrt(d)) v`` over the last two axes."""
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2] or q.shape[:-2] != k.shape[:-2]:
        raise ValueError(f"attention shape mismatch: q {q.shape}, k {k.shape}, v {v.shape}")
    c = 1.0 / math.sqrt(q.shape[-1])
    kt = np.swapaxes(k.data, -1, -2)
    p = _softmax((q.data @ kt) * c)
    out = Tensor(p @ v.data, dtype=q.dtype)

    def backward(g):
        gp = g @ np.swapaxes(v.data, -1, -2)
        gv = np.swapaxes(p, -1, -2) @ g
        gs = p * (gp - (gp * p).sum(axis=-1, keepdims=True)) * c
        gq = gs @ k.data
        gk = np.swapaxes(gs, -1, -2) @ q.data
        return gq, gk, gv

    return record(out, (q, k, v), backward)


def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean of squared differences; gradient flows to both arguments."""
    target = _wrap(target, pred)
    if pred.shape != target.shape:
        raise ValueError(f"mse_loss shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    out = Tensor(np.asarray(np.mean(diff * diff), dtype=pred.dtype), dtype=pred.dtype)
    c = 2.0 / diff.size

    def backward(g):
        gd = diff * (g * c)
        return gd, -gd

    return record(out, (pred, target), backward)


PRIMITIVES = {
    "dense": dense,
    "conv2d": conv2d,
    "conv2d_transpose": conv2d_transpose,
    "bilinear_upsample": bilinear_upsample,
    "relu": relu,
    "layer_norm": layer_norm,
    "softmax": softmax,
    "scaled_dot_attention": scaled_dot_attention,
    "residual_add": residual_add,
    "mse_loss": mse_loss,
}


def primitive_forward(kind: str, *inputs, **params) -> Tensor:
    try:
        fn = PRIMITIVES[kind]
    except KeyError:
        raise ValueError(f"unknown primitive {kind!r}") from None
    return fn(*inputs, **params)
