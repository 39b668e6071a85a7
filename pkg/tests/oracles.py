"""Slow, obviously-correct reference implementations used as oracles.

Everything here is written the dumb way on purpose: quadruple loops,
two-pass statistics, exhaustive searches. Nothing from the package under
test is imported.
"""

import numpy as np


def conv2d_loops(x, kernel, bias, stride=1, pad=0):
    """Direct convolution, one output element at a time."""
    c, h, w = x.shape
    o, _, kh, kw = kernel.shape
    padded = np.zeros((c, h + 2 * pad, w + 2 * pad), dtype=np.float64)
    padded[:, pad:pad + h, pad:pad + w] = x
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    out = np.zeros((o, oh, ow), dtype=np.float64)
    for f in range(o):
        for i in range(oh):
            for j in range(ow):
                acc = 0.0
                for ci in range(c):
                    for u in range(kh):
                        for v in range(kw):
                            acc += (
                                padded[ci, i * stride + u, j * stride + v]
                                * kernel[f, ci, u, v]
                            )
                out[f, i, j] = acc + bias[f]
    return out


def maxpool_loops(x, window=2, stride=2):
    """Max pooling with first-occurrence (row-major) argmax ties."""
    c, h, w = x.shape
    oh = (h - window) // stride + 1
    ow = (w - window) // stride + 1
    out = np.zeros((c, oh, ow), dtype=x.dtype)
    idx = np.zeros((c, oh, ow), dtype=np.int64)
    for ci in range(c):
        for i in range(oh):
            for j in range(ow):
                best = -np.inf
                best_flat = -1
                for u in range(window):
                    for v in range(window):
                        y, z = i * stride + u, j * stride + v
                        if x[ci, y, z] > best:
                            best = x[ci, y, z]
                            best_flat = ci * h * w + y * w + z
                out[ci, i, j] = best
                idx[ci, i, j] = best_flat
    return out, idx


def two_pass_column_stats(values, labels):
    """Within/between variances per column, computed the textbook way.

    Returns raw scatter sums (not normalized), matching a per-class
    deviation accumulation done one sample at a time.
    """
    n, d = values.shape
    mu = values.mean(axis=0)
    s2w = np.zeros(d)
    s2b = np.zeros(d)
    for lbl in np.unique(labels):
        rows = values[labels == lbl]
        mu_i = rows.mean(axis=0)
        for r in rows:
            s2w += (r - mu_i) ** 2
        s2b += len(rows) * (mu_i - mu) ** 2
    return s2w, s2b


def scatter_loops(values, labels):
    """Full within/between scatter matrices via explicit outer products."""
    n, d = values.shape
    mu = values.mean(axis=0)
    sw = np.zeros((d, d))
    sb = np.zeros((d, d))
    for lbl in np.unique(labels):
        rows = values[labels == lbl]
        mu_i = rows.mean(axis=0)
        for r in rows:
            dev = r - mu_i
            sw += np.outer(dev, dev)
        diff = mu_i - mu
        sb += len(rows) * np.outer(diff, diff)
    return sw, sb


def central_difference_grads(loss_fn, params, eps=1e-5):
    """Central-difference gradient of a scalar function of one array."""
    grad = np.zeros_like(params, dtype=np.float64)
    flat = params.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = loss_fn()
        flat[i] = orig - eps
        lo = loss_fn()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * eps)
    return grad


def svm_lattice_search(features, labels, c, w_range, b_range, steps):
    """Exhaustive grid minimization of the primal hinge objective in 2-D."""
    best = np.inf
    grid = np.linspace(-w_range, w_range, steps)
    bgrid = np.linspace(-b_range, b_range, steps)
    for w0 in grid:
        for w1 in grid:
            for b in bgrid:
                margins = labels * (features[:, 0] * w0 + features[:, 1] * w1 + b)
                hinge = np.maximum(0.0, 1.0 - margins).sum()
                obj = 0.5 * (w0 * w0 + w1 * w1) + c * hinge
                if obj < best:
                    best = obj
    return best
