"""Shared helpers: independent loop-based oracles and small fixtures."""

import math

import numpy as np
import pytest

from fedhen import NestedArchSpec, gen_synthetic


def naive_forward(widths, activation, w, x):
    """Element-by-element forward pass with explicit Python loops.

    Deliberately written without matrix ops so it cannot share a code path
    with the vectorized implementation it checks.
    """
    a = [[float(v) for v in row] for row in x]
    offset = 0
    n_layers = len(widths) - 1
    for layer in range(n_layers):
        fan_in, fan_out = widths[layer], widths[layer + 1]
        weight = [[w[offset + i * fan_out + j] for j in range(fan_out)]
                  for i in range(fan_in)]
        offset += fan_in * fan_out
        bias = [w[offset + j] for j in range(fan_out)]
        offset += fan_out
        nxt = []
        for row in a:
            out_row = []
            for j in range(fan_out):
                total = bias[j]
                for i in range(fan_in):
                    total += row[i] * weight[i][j]
                if layer < n_layers - 1:
                    total = max(total, 0.0) if activation == "relu" else math.tanh(total)
                out_row.append(total)
            nxt.append(out_row)
        a = nxt
    return np.array(a)


def label_entropy(labels, n_classes):
    """Shannon entropy (nats) of a label multiset."""
    counts = np.bincount(labels, minlength=n_classes).astype(float)
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def make_arch(n_classes=3, activation="relu"):
    """Small non-degenerate architecture for unit tests."""
    return NestedArchSpec((4, 5), (5, n_classes), (5, 6), (6, n_classes),
                          n_classes=n_classes, activation=activation)


@pytest.fixture
def tiny_dataset():
    return gen_synthetic(60, 4, 3, np.random.default_rng(7))
