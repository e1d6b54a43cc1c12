"""Device-side training: plain local SGD and the side-objective variant.

Both procedures share one epoch/batch schedule so that, for identical seeds,
disabling the side objective reproduces plain training bit for bit. A client
that diverges returns its non-finite weights instead of raising; the server
guard is responsible for dropping such uploads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models, nn
from .data import Dataset


@dataclass(frozen=True)
class ClientConfig:
    """Local-optimization knobs shared by every device in a run."""

    epochs: int = 5
    eta: float = 0.1
    batch_size: int = 50
    clip_norm: float | None = 10.0
    side_coeff: float = 1.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive or None")
        if self.side_coeff < 0:
            raise ValueError("side_coeff must be non-negative")


def _local_sgd(w_start, shard: Dataset, grad_fn, cfg: ClientConfig,
               rng: np.random.Generator) -> np.ndarray:
    """Shared schedule: per epoch, a fresh shuffle walked in full batches plus
    one final partial batch, clip applied to the combined gradient."""
    if shard.n < 1:
        raise ValueError("empty shard")
    w = np.array(w_start, dtype=np.float64)
    inputs, labels = shard.inputs, shard.labels
    for _ in range(cfg.epochs):
        order = rng.permutation(shard.n)
        for start in range(0, shard.n, cfg.batch_size):
            if not np.isfinite(w).all():
                return w
            sel = order[start:start + cfg.batch_size]
            _, grad = grad_fn(w, nn.Batch(inputs[sel], labels[sel]))
            if not np.isfinite(grad).all():
                # poison the weights and bail; nan_guard flags the upload
                return nn.sgd_update(w, grad, cfg.eta)
            if cfg.clip_norm is not None:
                grad = nn.clip_global_norm(grad, cfg.clip_norm)
            w = nn.sgd_update(w, grad, cfg.eta)
    return w


def client_training(w_start, shard: Dataset, spec, cfg: ClientConfig,
                    rng: np.random.Generator) -> np.ndarray:
    """Plain local SGD for E epochs starting from the received server model.

    spec may be an MlpSpec, or a NestedArchSpec when a complex device trains
    without the side objective (its exit head then receives no gradient).
    """
    if isinstance(spec, models.NestedArchSpec):
        def grad_fn(w, batch):
            return models.complex_loss_and_grad(spec, w, batch)
    else:
        def grad_fn(w, batch):
            return nn.loss_and_grad(spec, w, batch)
    return _local_sgd(w_start, shard, grad_fn, cfg, rng)


def client_training_side_obj(w_start, shard: Dataset, spec: models.NestedArchSpec,
                             cfg: ClientConfig, rng: np.random.Generator) -> np.ndarray:
    """Complex-device training with the auxiliary sub-network objective.

    Each batch contributes the complex-path gradient plus side_coeff times the
    embedded simple model's gradient (supported on the sub-net coordinates
    only); the sum is clipped and applied as one update. side_coeff = 0
    reduces exactly to plain training on the complex model.
    """
    coeff = cfg.side_coeff

    def grad_fn(w, batch):
        loss, grad = models.complex_loss_and_grad(spec, w, batch)
        if coeff != 0.0:
            _, side = models.side_loss_and_grad(spec, w, batch)
            grad = grad + coeff * side
        return loss, grad

    return _local_sgd(w_start, shard, grad_fn, cfg, rng)
