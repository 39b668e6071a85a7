"""Layer primitives for the inference engine.

All ops are pure functions. Dot products accumulate in float64 and results
are cast back to the input dtype, so float32 models produce reproducible
sums. Max-pooling returns the winning flat input index per output cell
("switches"); ties break to the smallest flat index.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .errors import ConfigurationError, DimensionError
from .tensor import Tensor


def conv_output_hw(h, w, kh, kw, stride, pad):
    """Spatial output extents of a conv/pool window sweep."""
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    return oh, ow


def _pad2d(x, pad):
    if pad == 0:
        return x
    c, h, w = x.shape
    out = np.zeros((c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
    out[:, pad:pad + h, pad:pad + w] = x
    return out


def _im2col(x, kh, kw, stride, pad):
    """(C,H,W) -> float64 matrix (OH*OW, C*kh*kw) of window contents."""
    c, h, w = x.shape
    oh, ow = conv_output_hw(h, w, kh, kw, stride, pad)
    xp = _pad2d(x, pad)
    sc, sh, sw = xp.strides
    win = as_strided(
        xp,
        shape=(c, oh, ow, kh, kw),
        strides=(sc, sh * stride, sw * stride, sh, sw),
    )
    cols = win.transpose(1, 2, 0, 3, 4).reshape(oh * ow, c * kh * kw)
    return np.asarray(cols, dtype=np.float64), oh, ow


def conv2d_forward(input: Tensor, kernel: Tensor, bias, stride=1, pad=0) -> Tensor:
    """2-D cross-correlation with zero padding.

    out[o,y,x] = bias[o] + sum_{c,i,j} input[c, y*stride+i-pad, x*stride+j-pad]
                 * kernel[o,c,i,j], reading zero outside the input bounds.
    """
    if input.data.ndim != 3:
        raise DimensionError(f"conv input must be (C,H,W), got {input.shape}")
    if kernel.data.ndim != 4:
        raise DimensionError(f"conv kernel must be (O,C,kh,kw), got {kernel.shape}")
    c, h, w = input.shape
    o, kc, kh, kw = kernel.shape
    if kc != c:
        raise DimensionError(
            f"kernel expects {kc} input channels, feature map has {c}"
        )
    b = np.asarray(bias, dtype=np.float64).reshape(-1)
    if b.shape[0] != o:
        raise DimensionError(f"bias length {b.shape[0]} != out channels {o}")
    if stride < 1:
        raise ConfigurationError(f"stride must be >= 1, got {stride}")
    if pad < 0:
        raise ConfigurationError(f"pad must be >= 0, got {pad}")
    oh, ow = conv_output_hw(h, w, kh, kw, stride, pad)
    if oh < 1 or ow < 1:
        raise ConfigurationError(
            f"conv of {h}x{w} with kernel {kh}x{kw} stride {stride} pad {pad} "
            f"produces empty output {oh}x{ow}"
        )
    cols, _, _ = _im2col(input.data, kh, kw, stride, pad)
    k2 = kernel.data.reshape(o, c * kh * kw).astype(np.float64)
    out = cols @ k2.T + b  # (OH*OW, O)
    out = out.T.reshape(o, oh, ow).astype(input.dtype)
    return Tensor(out)


def conv2d_adjoint(gout, kernel, stride=1, pad=0, out_hw=None):
    """Exact adjoint of bias-free conv2d_forward, on raw arrays.

    gout: (O,OH,OW); kernel: (O,C,kh,kw) -> (C,H,W). When the forward floor
    division dropped trailing rows/cols, pass the original (H,W) as out_hw.
    """
    gout = np.asarray(gout)
    kern = np.asarray(kernel)
    o, oh, ow = gout.shape
    ko, c, kh, kw = kern.shape
    if ko != o:
        raise DimensionError(f"signal has {o} channels, kernel produces {ko}")
    if out_hw is None:
        h = (oh - 1) * stride + kh - 2 * pad
        w = (ow - 1) * stride + kw - 2 * pad
    else:
        h, w = out_hw
        eh, ew = conv_output_hw(h, w, kh, kw, stride, pad)
        if (eh, ew) != (oh, ow):
            raise DimensionError(
                f"forward of {h}x{w} would give {eh}x{ew}, signal is {oh}x{ow}"
            )
    if h < 1 or w < 1:
        raise DimensionError(f"adjoint output {h}x{w} is empty")
    g2 = gout.reshape(o, oh * ow).astype(np.float64)
    k2 = kern.reshape(o, c * kh * kw).astype(np.float64)
    cols = g2.T @ k2  # (OH*OW, C*kh*kw)
    cols = cols.reshape(oh, ow, c, kh, kw)
    xp = np.zeros((c, h + 2 * pad, w + 2 * pad), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            xp[:, i:i + (oh - 1) * stride + 1:stride,
               j:j + (ow - 1) * stride + 1:stride] += cols[:, :, :, i, j].transpose(2, 0, 1)
    out = xp[:, pad:pad + h, pad:pad + w]
    return out.astype(gout.dtype)


def conv2d_param_grads(x, gout, kh, kw, stride=1, pad=0):
    """Weight and bias gradients for conv2d_forward, on raw arrays."""
    c = x.shape[0]
    o = gout.shape[0]
    cols, oh, ow = _im2col(x, kh, kw, stride, pad)
    g2 = gout.reshape(o, oh * ow).astype(np.float64)
    dw = (g2 @ cols).reshape(o, c, kh, kw)
    db = g2.sum(axis=1)
    return dw.astype(x.dtype), db.astype(x.dtype)


def relu_forward(input: Tensor) -> Tensor:
    return Tensor(np.maximum(input.data, 0))


def maxpool_forward(input: Tensor, window, stride):
    """Max-pool each channel; also return the winning flat input indices.

    Switches are flat indices into the full (C,H,W) input; ties break to the
    smallest flat index (numpy argmax scan order matches).
    """
    if input.data.ndim != 3:
        raise DimensionError(f"pool input must be (C,H,W), got {input.shape}")
    c, h, w = input.shape
    if window > h or window > w:
        raise ConfigurationError(f"pool window {window} exceeds input {h}x{w}")
    if window < 1 or stride < 1:
        raise ConfigurationError("pool window and stride must be >= 1")
    oh, ow = conv_output_hw(h, w, window, window, stride, 0)
    if oh < 1 or ow < 1:
        raise ConfigurationError("pooling produces empty output")
    x = input.data
    sc, sh, sw = x.strides
    win = as_strided(
        x,
        shape=(c, oh, ow, window, window),
        strides=(sc, sh * stride, sw * stride, sh, sw),
    )
    flat = win.reshape(c, oh, ow, window * window)
    local = flat.argmax(axis=3)  # first max in window scan order
    vals = np.take_along_axis(flat, local[..., None], axis=3)[..., 0]
    wi, wj = local // window, local % window
    ys = np.arange(oh)[None, :, None] * stride + wi
    xs = np.arange(ow)[None, None, :] * stride + wj
    chan = np.arange(c)[:, None, None]
    switches = (chan * (h * w) + ys * w + xs).astype(np.int64)
    return Tensor(vals.astype(input.dtype)), switches


def dense_forward(input: Tensor, weights: Tensor, bias) -> Tensor:
    """Affine map W @ x + b on a rank-1 input."""
    if input.data.ndim != 1:
        raise DimensionError(f"dense input must be a vector, got {input.shape}")
    if weights.data.ndim != 2:
        raise DimensionError(f"dense weights must be (m,n), got {weights.shape}")
    m, n = weights.shape
    if input.shape[0] != n:
        raise DimensionError(f"dense expects input of {n}, got {input.shape[0]}")
    b = np.asarray(bias, dtype=np.float64).reshape(-1)
    if b.shape[0] != m:
        raise DimensionError(f"bias length {b.shape[0]} != out dim {m}")
    out = weights.data.astype(np.float64) @ input.data.astype(np.float64) + b
    return Tensor(out.astype(input.dtype))


def softmax(scores: Tensor) -> Tensor:
    """Numerically stable softmax (max subtraction)."""
    x = scores.data
    if x.ndim != 1:
        raise DimensionError(f"softmax input must be a vector, got {scores.shape}")
    if np.isnan(x).any():
        raise ValueError("softmax input contains NaN")
    z = x.astype(np.float64)
    z = z - z.max()
    e = np.exp(z)
    return Tensor((e / e.sum()).astype(x.dtype))
