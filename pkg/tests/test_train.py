"""Backprop gradients, the SGD loop, masking, and failure modes."""

import warnings

import numpy as np
import pytest

from fisherprune.errors import ConfigurationError, TrainingDiverged
from fisherprune.network import build_cnn, forward
from fisherprune.tensor import Tensor
from fisherprune.train import (
    TrainConfig, accuracy, backward, cross_entropy, retrain, train, write_log,
)

import oracles


def widen_to_float64(net):
    """Swap all parameters for float64 copies so finite differences behave."""
    for layer in net.layers:
        if layer.weights is not None:
            layer.weights = layer.weights.astype(np.float64)
            layer.bias = layer.bias.astype(np.float64)
    return net


def toy_split(n=8, size=16, seed=2):
    """Left-bright vs right-bright squares, linearly separable on purpose."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for label in (0, 1):
        for _ in range(n):
            img = rng.normal(0.1, 0.02, (1, size, size))
            half = slice(0, size // 2) if label == 0 else slice(size // 2, size)
            img[0, :, half] += 0.8
            images.append(np.clip(img, 0, 1).astype(np.float32))
            labels.append(label)
    return images, np.array(labels, dtype=np.int64)


class TestGradients:
    def test_matches_central_differences_everywhere(self):
        """Analytic grads vs finite differences on every parametric layer."""
        net = widen_to_float64(
            build_cnn((1, 6, 6), [(2, 3, 1, True)], [4], 2, seed=11))
        x = np.random.default_rng(4).random((1, 6, 6))
        label = 1

        _, rec = forward(net, Tensor(x), record=True)
        grads = backward(net, rec, label)

        def loss():
            return cross_entropy(forward(net, Tensor(x)).data, label)

        assert set(grads) == {0, 4, 6}
        for li, (dw, db) in grads.items():
            for analytic, params in ((dw, net.layers[li].weights),
                                     (db, net.layers[li].bias)):
                fd = oracles.central_difference_grads(loss, params)
                scale = np.abs(fd).max() + 1e-8
                assert np.abs(analytic - fd).max() <= 1e-4 * scale

    def test_backward_needs_softmax_tail(self):
        net = build_cnn((1, 6, 6), [(2, 3, 1, False)], [], 2, seed=0)
        net.layers.pop()  # drop the softmax
        x = Tensor(np.zeros((1, 6, 6), dtype=np.float32))
        _, rec = forward(net, x, record=True)
        with pytest.raises(ConfigurationError):
            backward(net, rec, 0)


class TestTrainLoop:
    def test_learns_separable_toy_task(self):
        images, labels = toy_split()
        net = build_cnn((1, 16, 16), [(4, 3, 1, True)], [8], 2, seed=1)
        result = train(net, images, labels, images, labels,
                       TrainConfig(epochs=8, seed=0))
        assert result.final_train_acc == 1.0
        assert accuracy(net, images, labels) == 1.0

    def test_same_seed_reproduces_weights(self):
        images, labels = toy_split()
        nets = []
        for _ in range(2):
            net = build_cnn((1, 16, 16), [(4, 3, 1, True)], [8], 2, seed=1)
            train(net, images, labels, images, labels,
                  TrainConfig(epochs=2, seed=0))
            nets.append(net)
        for a, b in zip(nets[0].layers, nets[1].layers):
            if a.weights is not None:
                np.testing.assert_array_equal(a.weights, b.weights)

    def test_huge_rate_diverges(self):
        images, labels = toy_split()
        net = build_cnn((1, 16, 16), [(4, 3, 1, True)], [8], 2, seed=1)
        with pytest.raises(TrainingDiverged), warnings.catch_warnings():
            # the blow-up path legitimately overflows float32 on the way to NaN
            warnings.simplefilter("ignore", RuntimeWarning)
            train(net, images, labels, images, labels,
                  TrainConfig(epochs=5, lr=1e5, seed=0))

    def test_empty_train_set_rejected(self):
        net = build_cnn((1, 16, 16), [(4, 3, 1, True)], [8], 2, seed=1)
        with pytest.raises(ConfigurationError):
            train(net, [], np.array([], dtype=np.int64), [], [],
                  TrainConfig(epochs=1))

    def test_out_of_range_labels_rejected(self):
        images, labels = toy_split(n=2)
        net = build_cnn((1, 16, 16), [(4, 3, 1, True)], [8], 2, seed=1)
        with pytest.raises(ConfigurationError, match="labels"):
            train(net, images, labels + 1, images, labels,
                  TrainConfig(epochs=1))

    def test_weight_mask_keeps_zeros_pinned(self):
        images, labels = toy_split(n=4)
        net = build_cnn((1, 16, 16), [(4, 3, 1, True)], [8], 2, seed=1)
        mask = np.ones_like(net.layers[0].weights)
        mask[2:] = 0.0  # kill the last two filters for good
        train(net, images, labels, images, labels,
              TrainConfig(epochs=3, seed=0), weight_mask={0: mask})
        assert np.all(net.layers[0].weights[2:] == 0.0)
        assert np.any(net.layers[0].weights[:2] != 0.0)

    def test_retrain_fine_tunes_in_place(self):
        images, labels = toy_split()
        net = build_cnn((1, 16, 16), [(4, 3, 1, True)], [8], 2, seed=1)
        train(net, images, labels, images, labels, TrainConfig(epochs=8, seed=0))
        before = net.layers[0].weights.copy()
        result = retrain(net, images, labels, images, labels,
                         TrainConfig(epochs=2, seed=0))
        # weights moved a little but the solved task stayed solved
        assert not np.array_equal(before, net.layers[0].weights)
        assert np.abs(before - net.layers[0].weights).max() < 0.1
        assert result.final_train_acc == 1.0


def test_log_round_trips_through_csv(tmp_path):
    path = tmp_path / "log.csv"
    write_log(str(path), [(0, 0.5, 0.75, 0.5), (1, 0.25, 1.0, 1.0)])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "epoch,loss,train_acc,eval_acc"
    assert lines[1] == "0,0.500000,0.750000,0.500000"
    assert len(lines) == 3
