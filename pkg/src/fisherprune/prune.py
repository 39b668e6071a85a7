"""Structured pruning: dependency scores + threshold -> physically smaller net.

A prune plan is a keep-list of filter indices per conv layer. Applying it
drops the removed out-filters and slices every consumer's kernels down to
the surviving input channels (the first dense layer is sliced by surviving
channel x spatial position). Surviving weights are copied bit-exact. A
masked forward pass over the original net provides the reference semantics
the pruned net must reproduce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import images_labels
from .errors import ConfigurationError, DimensionError
from .network import Network, forward
from .tensor import Tensor
from .train import TrainConfig, accuracy, retrain


@dataclass
class PrunePlan:
    """Sorted keep-list per conv layer index, plus the threshold used."""

    keep: dict  # conv layer index -> sorted int64 array of kept filters
    threshold: float
    forced_layers: set = field(default_factory=set)  # empty-layer guard fired

    def param_counts(self, net: Network):
        """Per-conv-layer (params_before, params_after) under this plan."""
        out = {}
        in_kept = None  # None = all input channels kept (image channels)
        for i in net.conv_indices():
            w = net.layers[i].weights
            o, c, kh, kw = w.shape
            kept_out = len(self.keep[i])
            kept_in = c if in_kept is None else in_kept
            before = o * c * kh * kw + o
            after = kept_out * kept_in * kh * kw + kept_out
            out[i] = (before, after)
            in_kept = kept_out
        return out

    def conv_rate(self, net: Network) -> float:
        """Fraction of conv parameters removed."""
        counts = self.param_counts(net)
        before = sum(b for b, _ in counts.values())
        after = sum(a for _, a in counts.values())
        return (before - after) / before if before else 0.0


@dataclass
class PruneReport:
    threshold: float
    conv_rate: float
    per_layer_rates: dict
    acc_before: float
    acc_after: float
    flagged: bool = False
    timings: dict | None = None


def build_prune_plan(table, selected, threshold) -> PrunePlan:
    """Keep filter f iff its dependency score >= threshold.

    The last conv layer is forced to exactly the selected neuron set. A
    layer that would lose every filter keeps its single highest-scoring one
    (smallest index on ties) and is flagged.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ConfigurationError(f"threshold must be in [0,1], got {threshold}")
    selected = np.sort(np.asarray(selected, dtype=np.int64).ravel())
    if selected.size == 0:
        raise ConfigurationError("selected neuron set is empty")
    layers = sorted(table.scores)
    last = layers[-1]
    keep = {}
    forced = set()
    for li in layers:
        if li == last:
            keep[li] = selected.copy()
            continue
        scores = np.asarray(table.scores[li], dtype=np.float64)
        kept = np.flatnonzero(scores >= threshold).astype(np.int64)
        if kept.size == 0:
            kept = np.array([int(np.argmax(scores))], dtype=np.int64)
            forced.add(li)
        keep[li] = kept
    return PrunePlan(keep=keep, threshold=float(threshold), forced_layers=forced)


def identity_plan(net: Network) -> PrunePlan:
    keep = {i: np.arange(net.layers[i].weights.shape[0], dtype=np.int64)
            for i in net.conv_indices()}
    return PrunePlan(keep=keep, threshold=0.0)


def apply_prune(net: Network, plan: PrunePlan) -> Network:
    """Slice the network down to the plan's keep-lists, values untouched."""
    conv_idx = net.conv_indices()
    if sorted(plan.keep) != conv_idx:
        raise DimensionError("plan layers do not match the model's conv layers")
    shapes = net.infer_shapes()
    out = net.copy()
    in_keep = None
    flat_keep = None
    last = conv_idx[-1]
    past_flatten = False
    for i, layer in enumerate(out.layers):
        if layer.kind == "conv":
            kept = np.asarray(plan.keep[i], dtype=np.int64)
            o = layer.weights.shape[0]
            if kept.size == 0 or kept.min() < 0 or kept.max() >= o:
                raise DimensionError(f"layer {i}: keep-list out of range for {o} filters")
            w = layer.weights[kept]
            if in_keep is not None:
                w = w[:, in_keep, :, :]
            layer.weights = np.ascontiguousarray(w)
            layer.bias = np.ascontiguousarray(layer.bias[kept])
            in_keep = kept
        elif layer.kind == "flatten":
            past_flatten = True
            c, h, w = shapes[i - 1]
            if in_keep is None:
                in_keep = np.arange(c, dtype=np.int64)
            # surviving channel c spans flat indices [c*h*w, (c+1)*h*w)
            flat_keep = (in_keep[:, None] * (h * w)
                         + np.arange(h * w, dtype=np.int64)[None, :]).ravel()
        elif layer.kind == "dense" and past_flatten and flat_keep is not None:
            layer.weights = np.ascontiguousarray(layer.weights[:, flat_keep])
            flat_keep = None
    out.infer_shapes()
    return out


def masked_forward(net: Network, plan: PrunePlan, image: Tensor):
    """Forward on the original net with pruned channels zeroed post-relu.

    Returns (output, list of post-mask activations per layer). Channels
    missing from a conv's keep-list are forced to zero right after that
    conv's relu, so downstream layers see exactly what the pruned net sees.
    """
    conv_idx = set(net.conv_indices())
    masks = {}
    for i in sorted(conv_idx):
        o = net.layers[i].weights.shape[0]
        m = np.zeros(o, dtype=np.float32)
        m[np.asarray(plan.keep[i], dtype=np.int64)] = 1.0
        masks[i] = m
    cur = image
    acts = []
    for i, layer in enumerate(net.layers):
        if layer.kind == "relu":
            cur = Tensor(np.maximum(cur.data, 0))
            if i - 1 in masks and cur.data.ndim == 3:
                cur = Tensor(cur.data * masks[i - 1][:, None, None])
        else:
            sub = Network(cur.shape, [layer])
            cur = forward(sub, cur)
        acts.append(cur.data.copy())
    return cur, acts


def masked_logits(net: Network, plan: PrunePlan, image: Tensor):
    if net.layers[-1].kind != "softmax":
        raise ConfigurationError("expected a softmax-terminated network")
    _, acts = masked_forward(net, plan, image)
    return acts[-2]


def pruned_logits(pruned: Network, image: Tensor):
    from .network import logits

    return logits(pruned, image).data


def equivalence_check(net: Network, plan: PrunePlan, images) -> float:
    """Max relative logit deviation between pruned and masked semantics."""
    pruned = apply_prune(net, plan)
    worst = 0.0
    for sample in images:
        ref = masked_logits(net, plan, sample.image)
        got = pruned_logits(pruned, sample.image)
        dev = np.abs(got - ref) / (np.abs(ref) + 1e-6)
        worst = max(worst, float(dev.max()))
    return worst


def plateau_threshold_search(net: Network, table, selected, split, grid,
                             eps_acc=0.02, retrain_config=None):
    """Prune+retrain at every grid threshold; pick the plateau edge t_0.

    t_0 is the largest threshold whose retrained accuracy is within eps_acc
    of the best accuracy on the grid. Returns (t_0, [PruneReport per point]).
    Each grid point retrains a fresh copy on a small fixed budget.
    """
    grid = [float(t) for t in grid]
    if not grid:
        raise ConfigurationError("threshold grid is empty")
    if sorted(grid) != grid:
        raise ConfigurationError("threshold grid must be sorted ascending")
    if eps_acc <= 0:
        raise ConfigurationError(f"eps_acc must be > 0, got {eps_acc}")
    cfg = retrain_config or TrainConfig(epochs=10)
    tr_imgs, tr_labels = images_labels(split.train)
    te_imgs, te_labels = images_labels(split.test)
    reports = []
    for t in grid:
        plan = build_prune_plan(table, selected, t)
        pruned = apply_prune(net, plan)
        before = accuracy(pruned, te_imgs, te_labels)
        retrain(pruned, tr_imgs, tr_labels, te_imgs, te_labels, cfg)
        after = accuracy(pruned, te_imgs, te_labels)
        counts = plan.param_counts(net)
        rates = {li: 1.0 - a / b for li, (b, a) in counts.items()}
        reports.append(PruneReport(
            threshold=t, conv_rate=plan.conv_rate(net), per_layer_rates=rates,
            acc_before=float(before), acc_after=float(after),
            flagged=bool(plan.forced_layers),
        ))
    best = max(r.acc_after for r in reports)
    t_0 = max(r.threshold for r in reports if r.acc_after >= best - eps_acc)
    return t_0, reports


def magnitude_mask(net: Network, rate: float):
    """Mask of the globally smallest-magnitude conv weights at the rate.

    Masks exactly ceil(rate * total conv weight count) entries; ties break
    by flat position so the same weights always selects the same mask.
    Biases are untouched. Returns {conv layer index: 0/1 float32 array}.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"rate must be in [0,1), got {rate}")
    conv_idx = net.conv_indices()
    mags = np.concatenate([np.abs(net.layers[i].weights).ravel() for i in conv_idx])
    total = mags.size
    n_zero = math.ceil(rate * total)
    masks = {i: np.ones_like(net.layers[i].weights) for i in conv_idx}
    if n_zero == 0:
        return masks
    cut = np.argsort(mags, kind="stable")[:n_zero]
    flat = np.ones(total, dtype=np.float32)
    flat[cut] = 0.0
    pos = 0
    for i in conv_idx:
        n = net.layers[i].weights.size
        masks[i] = flat[pos:pos + n].reshape(net.layers[i].weights.shape).copy()
        pos += n
    return masks


def magnitude_baseline(net: Network, rate: float, split, retrain_config=None):
    """Mask smallest conv weights, retrain with the mask pinned, report accuracy.

    Works on a copy; returns (accuracy after retrain, mask dict).
    """
    cfg = retrain_config or TrainConfig(epochs=10)
    work = net.copy()
    masks = magnitude_mask(work, rate)
    tr_imgs, tr_labels = images_labels(split.train)
    te_imgs, te_labels = images_labels(split.test)
    retrain(work, tr_imgs, tr_labels, te_imgs, te_labels, cfg, weight_mask=masks)
    acc = accuracy(work, te_imgs, te_labels)
    return float(acc), masks
