"""Minimal dense-network engine: forward pass, exact manual backprop, SGD, clipping.

All arithmetic is float64. The parameters of a network live in one flat vector
with a fixed layout: for every layer, the (fan_in x fan_out) weight matrix in
row-major order followed by its bias vector. Index sets defined on top of these
vectors (see :mod:`fedhen.models`) rely on this layout never changing.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

ACTIVATIONS = ("relu", "tanh")

CHECKPOINT_MAGIC = b"FHWV"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpSpec:
    """Fully-connected classifier architecture: widths from input dim to logits."""

    layer_widths: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2:
            raise ValueError("spec needs at least input and output widths")
        if any(w < 1 for w in widths):
            raise ValueError(f"layer widths must be >= 1, got {widths}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "layer_widths", widths)

    @cached_property
    def layers(self) -> tuple[tuple[int, int, int, int], ...]:
        """Per-layer (fan_in, fan_out, weight_offset, bias_offset) into the flat vector."""
        out = []
        offset = 0
        for fan_in, fan_out in zip(self.layer_widths[:-1], self.layer_widths[1:]):
            out.append((fan_in, fan_out, offset, offset + fan_in * fan_out))
            offset += fan_in * fan_out + fan_out
        return tuple(out)

    @cached_property
    def param_count(self) -> int:
        return sum(fi * fo + fo for fi, fo, _, _ in self.layers)

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def output_dim(self) -> int:
        return self.layer_widths[-1]


@dataclass
class Batch:
    """One training batch: (batch_size x input_dim) inputs and integer class labels."""

    inputs: np.ndarray
    labels: np.ndarray


def _check_weights(spec: MlpSpec, w, require_finite: bool = False) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size != spec.param_count:
        raise ValueError(
            f"weight vector has {w.size} entries, spec {spec.layer_widths} needs {spec.param_count}"
        )
    if require_finite and not np.isfinite(w).all():
        raise ValueError("weight vector contains non-finite entries")
    return w


def _check_inputs(spec: MlpSpec, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ValueError(
            f"inputs of shape {x.shape} do not match input dim {spec.input_dim}"
        )
    return x


def _check_batch(spec: MlpSpec, batch: Batch) -> tuple[np.ndarray, np.ndarray]:
    x = _check_inputs(spec, batch.inputs)
    y = np.asarray(batch.labels, dtype=np.int64)
    if y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise ValueError("labels must be one integer per batch row")
    if x.shape[0] < 1:
        raise ValueError("batch is empty")
    if y.min() < 0 or y.max() >= spec.output_dim:
        raise ValueError(f"labels must lie in [0, {spec.output_dim})")
    return x, y


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad_from_output(a: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return (a > 0.0).astype(np.float64)
    return 1.0 - a * a


def init_params(spec: MlpSpec, rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights, zero biases; deterministic given the generator state."""
    w = np.empty(spec.param_count, dtype=np.float64)
    for fan_in, fan_out, w_off, b_off in spec.layers:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w[w_off:w_off + fan_in * fan_out] = rng.uniform(-limit, limit, fan_in * fan_out)
        w[b_off:b_off + fan_out] = 0.0
    return w


def forward_logits(spec: MlpSpec, w, inputs) -> np.ndarray:
    """Pure forward pass; returns (batch x output_dim) logits."""
    w = _check_weights(spec, w)
    a = _check_inputs(spec, inputs)
    last = len(spec.layers) - 1
    for k, (fan_in, fan_out, w_off, b_off) in enumerate(spec.layers):
        weight = w[w_off:w_off + fan_in * fan_out].reshape(fan_in, fan_out)
        z = a @ weight + w[b_off:b_off + fan_out]
        a = _activate(z, spec.activation) if k < last else z
    return a


def softmax_cross_entropy(logits: np.ndarray, labels) -> float:
    """Mean softmax cross-entropy of logits against integer labels."""
    labels = np.asarray(labels, dtype=np.int64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(logits.shape[0])
    return float(np.mean(logz - shifted[rows, labels]))


def loss_and_grad(spec: MlpSpec, w, batch: Batch) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its exact gradient.

    The gradient is derived by hand-rolled backprop through the fixed layout,
    so it matches central finite differences to rounding error.
    """
    w = _check_weights(spec, w, require_finite=True)
    x, y = _check_batch(spec, batch)

    layers = spec.layers
    last = len(layers) - 1
    acts = [x]
    for k, (fan_in, fan_out, w_off, b_off) in enumerate(layers):
        weight = w[w_off:w_off + fan_in * fan_out].reshape(fan_in, fan_out)
        z = acts[-1] @ weight + w[b_off:b_off + fan_out]
        acts.append(_activate(z, spec.activation) if k < last else z)

    logits = acts[-1]
    n = x.shape[0]
    rows = np.arange(n)
    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    zsum = expz.sum(axis=1, keepdims=True)
    loss = float(np.mean(np.log(zsum[:, 0]) - shifted[rows, y]))

    delta = expz / zsum
    delta[rows, y] -= 1.0
    delta /= n

    grad = np.empty_like(w)
    for k in range(last, -1, -1):
        fan_in, fan_out, w_off, b_off = layers[k]
        grad[w_off:w_off + fan_in * fan_out] = (acts[k].T @ delta).ravel()
        grad[b_off:b_off + fan_out] = delta.sum(axis=0)
        if k > 0:
            weight = w[w_off:w_off + fan_in * fan_out].reshape(fan_in, fan_out)
            delta = (delta @ weight.T) * _activation_grad_from_output(
                acts[k], spec.activation
            )
    return loss, grad


def clip_global_norm(g, max_norm: float) -> np.ndarray:
    """Rescale g so its L2 norm is at most max_norm; below the bound g is returned as is."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    g = np.asarray(g, dtype=np.float64)
    if not np.isfinite(g).all():
        raise ValueError("cannot clip a non-finite gradient")
    norm = float(np.linalg.norm(g))
    if norm <= max_norm:
        return g
    out = g * (max_norm / norm)
    # rounding can leave the rescaled norm a few ulps above the bound
    while True:
        norm = float(np.linalg.norm(out))
        if norm <= max_norm:
            return out
        scale = max_norm / norm
        if scale >= 1.0:
            scale = np.nextafter(1.0, 0.0)
        out = out * scale


def sgd_update(w, g, eta: float) -> np.ndarray:
    """One gradient step: w - eta * g, elementwise."""
    w = np.asarray(w, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if w.shape != g.shape:
        raise ValueError(f"weight/gradient length mismatch: {w.shape} vs {g.shape}")
    return w - eta * g


def save_weights(path, w) -> None:
    """Write a weight vector as a checkpoint: FHWV magic, u32 version, u64 count, LE doubles."""
    w = np.ascontiguousarray(np.asarray(w, dtype=np.float64))
    if w.ndim != 1:
        raise ValueError("checkpoint expects a flat weight vector")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIQ", CHECKPOINT_MAGIC, CHECKPOINT_VERSION, w.size))
        fh.write(w.astype("<f8").tobytes())


def load_weights(path) -> np.ndarray:
    """Read a checkpoint written by :func:`save_weights`."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise ValueError(f"{path}: truncated checkpoint header")
        magic, version, count = struct.unpack("<4sIQ", header)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        payload = fh.read(8 * count)
    if len(payload) != 8 * count:
        raise ValueError(f"{path}: truncated checkpoint payload")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64)
