"""Sequential CNN container: layer descriptors, shape inference, forward pass.

A network is a list of LayerSpec entries applied in order to a (C,H,W)
input. Parameters live on the specs themselves (conv/dense only). The
forward pass can record every intermediate activation plus pooling
switches, which the dependency tracer and the backward pass both consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .errors import ConfigurationError, DimensionError
from .tensor import Tensor

LAYER_KINDS = ("conv", "relu", "maxpool", "flatten", "dense", "softmax")


@dataclass
class LayerSpec:
    """One layer of a sequential network.

    kind is one of conv / relu / maxpool / flatten / dense / softmax.
    weights and bias are populated for conv ((O,C,kh,kw) and (O,)) and
    dense ((m,n) and (m,)) layers only.
    """

    kind: str
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None
    stride: int = 1
    pad: int = 0
    window: int = 0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigurationError(f"unknown layer kind {self.kind!r}")

    @classmethod
    def conv(cls, weights, bias, stride=1, pad=0):
        w = np.ascontiguousarray(weights, dtype=np.float32)
        b = np.ascontiguousarray(bias, dtype=np.float32).reshape(-1)
        if w.ndim != 4:
            raise DimensionError(f"conv weights must be (O,C,kh,kw), got {w.shape}")
        if b.shape[0] != w.shape[0]:
            raise DimensionError("conv bias length must match out channels")
        return cls("conv", weights=w, bias=b, stride=stride, pad=pad)

    @classmethod
    def relu(cls):
        return cls("relu")

    @classmethod
    def maxpool(cls, window, stride):
        return cls("maxpool", window=window, stride=stride)

    @classmethod
    def flatten(cls):
        return cls("flatten")

    @classmethod
    def dense(cls, weights, bias):
        w = np.ascontiguousarray(weights, dtype=np.float32)
        b = np.ascontiguousarray(bias, dtype=np.float32).reshape(-1)
        if w.ndim != 2:
            raise DimensionError(f"dense weights must be (m,n), got {w.shape}")
        if b.shape[0] != w.shape[0]:
            raise DimensionError("dense bias length must match out dim")
        return cls("dense", weights=w, bias=b)

    @classmethod
    def softmax(cls):
        return cls("softmax")

    def param_count(self):
        n = 0
        if self.weights is not None:
            n += self.weights.size
        if self.bias is not None:
            n += self.bias.size
        return n


@dataclass
class Network:
    """An ordered stack of layers plus the input shape it expects."""

    input_shape: tuple
    layers: list = field(default_factory=list)

    def infer_shapes(self):
        """Shape of each layer's output, validating the whole chain."""
        shape = tuple(self.input_shape)
        out = []
        for i, layer in enumerate(self.layers):
            try:
                shape = _layer_out_shape(layer, shape)
            except (DimensionError, ConfigurationError) as exc:
                raise type(exc)(f"layer {i} ({layer.kind}): {exc}") from None
            out.append(shape)
        return out

    def conv_indices(self):
        return [i for i, l in enumerate(self.layers) if l.kind == "conv"]

    def last_conv_index(self):
        idx = self.conv_indices()
        if not idx:
            raise ConfigurationError("network has no conv layers")
        return idx[-1]

    def param_count(self):
        """(conv_params, fc_params): fc covers every layer after the last conv."""
        split = self.last_conv_index()
        conv = sum(l.param_count() for l in self.layers[: split + 1])
        fc = sum(l.param_count() for l in self.layers[split + 1:])
        return conv, fc

    def copy(self):
        layers = []
        for l in self.layers:
            layers.append(LayerSpec(
                kind=l.kind,
                weights=None if l.weights is None else l.weights.copy(),
                bias=None if l.bias is None else l.bias.copy(),
                stride=l.stride, pad=l.pad, window=l.window,
            ))
        return Network(tuple(self.input_shape), layers)


@dataclass
class ForwardRecord:
    """Everything the backward pass / deconv tracer needs from one forward run."""

    input: np.ndarray
    activations: list  # activations[i] = output of layer i, raw array
    switches: dict  # layer index -> flat-index switch array for maxpool


def forward(net: Network, x: Tensor, record=False):
    """Run the network on one input; optionally keep all intermediates.

    Returns the output Tensor, or (output, ForwardRecord) when record=True.
    Layer failures are re-raised with the layer index prepended.
    """
    if tuple(x.shape) != tuple(net.input_shape):
        raise DimensionError(
            f"network expects input {net.input_shape}, got {x.shape}"
        )
    rec = ForwardRecord(input=x.data.copy(), activations=[], switches={}) if record else None
    cur = x
    for i, layer in enumerate(net.layers):
        try:
            if layer.kind == "conv":
                cur = ops.conv2d_forward(
                    cur, Tensor(layer.weights), layer.bias,
                    stride=layer.stride, pad=layer.pad,
                )
            elif layer.kind == "relu":
                cur = ops.relu_forward(cur)
            elif layer.kind == "maxpool":
                cur, sw = ops.maxpool_forward(cur, layer.window, layer.stride)
                if rec is not None:
                    rec.switches[i] = sw
            elif layer.kind == "flatten":
                cur = Tensor(cur.data.reshape(-1))
            elif layer.kind == "dense":
                cur = ops.dense_forward(cur, Tensor(layer.weights), layer.bias)
            elif layer.kind == "softmax":
                cur = ops.softmax(cur)
        except (DimensionError, ConfigurationError, ValueError) as exc:
            raise type(exc)(f"layer {i} ({layer.kind}): {exc}") from None
        if rec is not None:
            rec.activations.append(cur.data.copy())
    if rec is not None:
        return cur, rec
    return cur


def logits(net: Network, x: Tensor):
    """Pre-softmax scores; requires the final layer to be softmax."""
    if not net.layers or net.layers[-1].kind != "softmax":
        raise ConfigurationError("network does not end in softmax")
    trunk = Network(net.input_shape, net.layers[:-1])
    return forward(trunk, x)


def _layer_out_shape(layer, shape):
    if layer.kind == "conv":
        if len(shape) != 3:
            raise DimensionError(f"conv needs (C,H,W) input, got {shape}")
        c, h, w = shape
        o, kc, kh, kw = layer.weights.shape
        if kc != c:
            raise DimensionError(f"kernel expects {kc} channels, input has {c}")
        oh, ow = ops.conv_output_hw(h, w, kh, kw, layer.stride, layer.pad)
        if oh < 1 or ow < 1:
            raise ConfigurationError("conv output is empty")
        return (o, oh, ow)
    if layer.kind == "maxpool":
        if len(shape) != 3:
            raise DimensionError(f"pool needs (C,H,W) input, got {shape}")
        c, h, w = shape
        if layer.window > h or layer.window > w:
            raise ConfigurationError(f"pool window {layer.window} exceeds {h}x{w}")
        oh, ow = ops.conv_output_hw(h, w, layer.window, layer.window, layer.stride, 0)
        if oh < 1 or ow < 1:
            raise ConfigurationError("pool output is empty")
        return (c, oh, ow)
    if layer.kind == "flatten":
        return (int(np.prod(shape)),)
    if layer.kind == "dense":
        if len(shape) != 1:
            raise DimensionError(f"dense needs a flat input, got {shape}")
        m, n = layer.weights.shape
        if shape[0] != n:
            raise DimensionError(f"dense expects {n} inputs, got {shape[0]}")
        return (m,)
    # relu / softmax keep the shape
    return shape


def kaiming_uniform(rng, shape, fan_in):
    """He-style uniform init, bound sqrt(6 / fan_in)."""
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def build_cnn(input_shape, conv_plan, dense_plan, n_classes, seed=0):
    """Assemble a conv/relu(/pool) trunk plus dense head with seeded init.

    conv_plan: list of (out_channels, kernel, pad, pool_after) tuples; a
    truthy pool_after appends a 2x2/stride-2 max-pool after the relu.
    dense_plan: list of hidden widths (each followed by relu). The final
    dense layer maps to n_classes and a softmax closes the network.
    """
    rng = np.random.default_rng(seed)
    layers = []
    c, h, w = input_shape
    for out_c, k, pad, pool in conv_plan:
        fan_in = c * k * k
        kw = kaiming_uniform(rng, (out_c, c, k, k), fan_in)
        kb = np.zeros(out_c, dtype=np.float32)
        layers.append(LayerSpec.conv(kw, kb, stride=1, pad=pad))
        layers.append(LayerSpec.relu())
        oh, ow = ops.conv_output_hw(h, w, k, k, 1, pad)
        c, h, w = out_c, oh, ow
        if pool:
            layers.append(LayerSpec.maxpool(2, 2))
            h, w = ops.conv_output_hw(h, w, 2, 2, 2, 0)
    layers.append(LayerSpec.flatten())
    n = c * h * w
    for width in dense_plan:
        dw = kaiming_uniform(rng, (width, n), n)
        db = np.zeros(width, dtype=np.float32)
        layers.append(LayerSpec.dense(dw, db))
        layers.append(LayerSpec.relu())
        n = width
    dw = kaiming_uniform(rng, (n_classes, n), n)
    db = np.zeros(n_classes, dtype=np.float32)
    layers.append(LayerSpec.dense(dw, db))
    layers.append(LayerSpec.softmax())
    net = Network(tuple(input_shape), layers)
    net.infer_shapes()
    return net


def reference_cnn(seed=0):
    """The stock six-conv architecture used across the pipeline.

    Grayscale 32x32 input; three conv blocks of two 3x3 same-pad convs each,
    2x2 pooling between blocks; 64-wide hidden dense layer; 2 classes. The
    last conv has 32 filters, which is the set the pruner operates on.
    """
    plan = [
        (16, 3, 1, False),
        (16, 3, 1, True),
        (32, 3, 1, False),
        (32, 3, 1, True),
        (32, 3, 1, False),
        (32, 3, 1, True),
    ]
    return build_cnn((1, 32, 32), plan, [64], 2, seed=seed)
