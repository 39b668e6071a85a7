"""Timing harness: per-layer and total per-image forward cost.

Medians over repeated runs (after warmups) to resist scheduler noise;
BLAS thread pools are pinned to one worker while timing when threadpoolctl
is importable.
"""

from __future__ import annotations

import contextlib
import statistics
import time

from .network import Network, forward
from .tensor import Tensor


def _single_thread():
    try:
        from threadpoolctl import threadpool_limits

        return threadpool_limits(limits=1)
    except Exception:
        return contextlib.nullcontext()


def _median_ms(fn, runs, warmup):
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(runs):
        t0 = time.perf_counter_ns()
        fn()
        times.append((time.perf_counter_ns() - t0) / 1e6)
    return statistics.median(times)


def time_network(net: Network, image: Tensor, runs=30, warmup=5):
    """Median per-layer and total forward time in milliseconds.

    Returns (per_layer, total_ms) where per_layer is a list of
    (layer_index, kind, median_ms). runs is clamped to at least 30 and
    warmup to at least 5.
    """
    runs = max(int(runs), 30)
    warmup = max(int(warmup), 5)
    _, rec = forward(net, image, record=True)
    inputs = [image.data] + rec.activations[:-1]
    per_layer = []
    with _single_thread():
        for i, layer in enumerate(net.layers):
            sub = Network(inputs[i].shape, [layer])
            x = Tensor(inputs[i].copy())
            ms = _median_ms(lambda: forward(sub, x), runs, warmup)
            per_layer.append((i, layer.kind, ms))
        total = _median_ms(lambda: forward(net, image), runs, warmup)
    return per_layer, total
