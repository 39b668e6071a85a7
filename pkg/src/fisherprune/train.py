"""Training: backprop through the sequential network, SGD with momentum.

Gradients flow backwards through the ForwardRecord kept by the forward
pass. The softmax layer is fused with cross-entropy (gradient p - onehot),
relu gates by the sign of its recorded output, and max-pool scatter-adds
through its stored switches.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import ops
from .errors import ConfigurationError, TrainingDiverged
from .network import ForwardRecord, Network, forward
from .tensor import Tensor


def cross_entropy(probs, label):
    p = max(float(probs[label]), 1e-12)
    return -np.log(p)


def backward(net: Network, rec: ForwardRecord, label: int):
    """Per-layer parameter gradients for one example.

    The network must end in softmax; the loss is cross-entropy against the
    integer label. Returns {layer_index: (dw, db)} for conv/dense layers.
    """
    if not net.layers or net.layers[-1].kind != "softmax":
        raise ConfigurationError("backward expects a softmax-terminated network")
    grads = {}
    probs = rec.activations[-1]
    g = probs.astype(np.float64).copy()
    g[label] -= 1.0  # softmax+CE fused
    # walk the remaining layers in reverse, skipping the softmax itself
    for i in range(len(net.layers) - 2, -1, -1):
        layer = net.layers[i]
        x = rec.activations[i - 1] if i > 0 else rec.input
        y = rec.activations[i]
        if layer.kind == "dense":
            dw = np.outer(g, x.astype(np.float64))
            db = g.copy()
            grads[i] = (dw.astype(np.float32), db.astype(np.float32))
            g = layer.weights.astype(np.float64).T @ g
        elif layer.kind == "relu":
            g = g * (y > 0)
        elif layer.kind == "flatten":
            g = g.reshape(x.shape)
        elif layer.kind == "maxpool":
            gin = np.zeros(x.size, dtype=np.float64)
            np.add.at(gin, rec.switches[i].ravel(), g.ravel())
            g = gin.reshape(x.shape)
        elif layer.kind == "conv":
            o, _, kh, kw = layer.weights.shape
            dw, db = ops.conv2d_param_grads(
                x.astype(np.float64), g, kh, kw, layer.stride, layer.pad
            )
            grads[i] = (dw.astype(np.float32), db.astype(np.float32))
            g = ops.conv2d_adjoint(
                g, layer.weights, layer.stride, layer.pad, out_hw=x.shape[1:]
            )
        else:
            raise ConfigurationError(f"no backward rule for {layer.kind}")
    return grads


@dataclass
class TrainConfig:
    epochs: int = 20
    lr: float = 0.005
    momentum: float = 0.9
    weight_decay: float = 1e-4
    seed: int = 0
    log_path: str | None = None


@dataclass
class TrainResult:
    epoch_log: list = field(default_factory=list)  # (epoch, loss, train_acc, eval_acc)
    final_train_acc: float = 0.0
    final_eval_acc: float = 0.0


def accuracy(net, images, labels):
    hit = 0
    for img, lab in zip(images, labels):
        p = forward(net, Tensor(img))
        if int(np.argmax(p.data)) == int(lab):
            hit += 1
    return hit / max(len(labels), 1)


def sgd_epoch(net, images, labels, order, lr, momentum, weight_decay,
              velocity, grad_mask=None):
    """One pass over the data in the given order; returns (mean loss, acc)."""
    total, hit = 0.0, 0
    for idx in order:
        x = Tensor(images[idx])
        try:
            probs, rec = forward(net, x, record=True)
        except ValueError as exc:
            if "NaN" in str(exc):
                raise TrainingDiverged(
                    f"activations went NaN on sample {idx} "
                    f"(lr={lr}, momentum={momentum}); reduce the learning rate"
                ) from None
            raise
        loss = cross_entropy(probs.data, int(labels[idx]))
        if not np.isfinite(loss):
            raise TrainingDiverged(
                f"loss became {loss} on sample {idx} "
                f"(lr={lr}, momentum={momentum}); reduce the learning rate"
            )
        total += loss
        if int(np.argmax(probs.data)) == int(labels[idx]):
            hit += 1
        grads = backward(net, rec, int(labels[idx]))
        for li, (dw, db) in grads.items():
            layer = net.layers[li]
            if grad_mask is not None and li in grad_mask:
                dw = dw * grad_mask[li]
            vw, vb = velocity.setdefault(
                li, (np.zeros_like(layer.weights), np.zeros_like(layer.bias))
            )
            vw[...] = momentum * vw - lr * (dw + weight_decay * layer.weights)
            vb[...] = momentum * vb - lr * db
            layer.weights += vw
            layer.bias += vb
            if grad_mask is not None and li in grad_mask:
                layer.weights *= grad_mask[li]
    n = max(len(order), 1)
    return total / n, hit / n


def train(net, train_images, train_labels, eval_images, eval_labels,
          config: TrainConfig, weight_mask=None):
    """SGD with momentum, shuffled each epoch from a seeded generator.

    weight_mask, when given, maps layer index -> 0/1 array the shape of that
    layer's weights; masked weights are zeroed after every update and their
    gradient contribution dropped, so they stay pruned for the whole run.
    A NaN loss aborts with TrainingDiverged.
    """
    if len(train_labels) == 0:
        raise ConfigurationError("training set is empty")
    bad = set(int(l) for l in train_labels) - {0, 1}
    if bad:
        raise ConfigurationError(f"labels must be in {{0,1}}, got extra {bad}")
    rng = np.random.default_rng(config.seed)
    velocity = {}
    if weight_mask:
        for li, m in weight_mask.items():
            net.layers[li].weights *= m
    result = TrainResult()
    for epoch in range(config.epochs):
        order = rng.permutation(len(train_labels))
        loss, tr_acc = sgd_epoch(
            net, train_images, train_labels, order,
            config.lr, config.momentum, config.weight_decay,
            velocity, grad_mask=weight_mask,
        )
        if not np.isfinite(loss):
            raise TrainingDiverged(
                f"loss became {loss} at epoch {epoch} "
                f"(lr={config.lr}, momentum={config.momentum}); "
                "reduce the learning rate"
            )
        ev_acc = accuracy(net, eval_images, eval_labels)
        result.epoch_log.append((epoch, float(loss), float(tr_acc), float(ev_acc)))
        result.final_train_acc, result.final_eval_acc = float(tr_acc), float(ev_acc)
    if config.log_path:
        write_log(config.log_path, result.epoch_log)
    return result


def retrain(net, train_images, train_labels, eval_images, eval_labels,
            config: TrainConfig, weight_mask=None):
    """Fine-tune surviving parameters: same loop at a tenth of the rate.

    No re-initialization happens; the network trains from whatever weights
    it currently holds.
    """
    cfg = TrainConfig(
        epochs=config.epochs, lr=config.lr * 0.1, momentum=config.momentum,
        weight_decay=config.weight_decay, seed=config.seed,
        log_path=config.log_path,
    )
    return train(net, train_images, train_labels, eval_images, eval_labels,
                 cfg, weight_mask=weight_mask)


def write_log(path, epoch_log):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss", "train_acc", "eval_acc"])
        for row in epoch_log:
            w.writerow([row[0], f"{row[1]:.6f}", f"{row[2]:.6f}", f"{row[3]:.6f}"])
