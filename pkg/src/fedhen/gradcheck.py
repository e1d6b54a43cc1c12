"""Finite-difference verification of the analytic gradients.

The numeric side only ever evaluates the loss through the forward pass, so it
is independent of the backprop code it checks. A component passes when

    |analytic - numeric| <= atol + rtol * max(|analytic|, |numeric|)

with rtol 1e-6 and atol 1e-8 by default; the absolute floor covers components
whose magnitude sits below the noise of central differences at h = 1e-5.
Cases drawn for the relu activation are resampled until every pre-activation
clears the step size by a wide margin, since a central difference straddling
the kink does not estimate the one-sided derivative either side of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn


def loss_only(spec: nn.MlpSpec, w, batch: nn.Batch) -> float:
    """Batch loss via the forward pass alone."""
    return nn.softmax_cross_entropy(nn.forward_logits(spec, w, batch.inputs),
                                    batch.labels)


def central_difference_grad(spec: nn.MlpSpec, w, batch: nn.Batch,
                            h: float = 1e-5) -> np.ndarray:
    """Numeric gradient: symmetric difference of the loss, one parameter at a time."""
    w = np.array(w, dtype=np.float64)
    grad = np.empty_like(w)
    for i in range(w.size):
        original = w[i]
        w[i] = original + h
        upper = loss_only(spec, w, batch)
        w[i] = original - h
        lower = loss_only(spec, w, batch)
        w[i] = original
        grad[i] = (upper - lower) / (2.0 * h)
    return grad


def _min_hidden_preactivation(spec: nn.MlpSpec, w, inputs) -> float:
    """Smallest |pre-activation| over all hidden units, via a plain layer walk."""
    a = np.asarray(inputs, dtype=np.float64)
    smallest = np.inf
    for k, (fan_in, fan_out, w_off, b_off) in enumerate(spec.layers):
        weight = np.asarray(w[w_off:w_off + fan_in * fan_out]).reshape(fan_in, fan_out)
        z = a @ weight + w[b_off:b_off + fan_out]
        if k < len(spec.layers) - 1:
            smallest = min(smallest, float(np.abs(z).min()))
            a = nn._activate(z, spec.activation)
        else:
            a = z
    return smallest


def random_case(rng: np.random.Generator, activation: str, h: float = 1e-5
                ) -> tuple[nn.MlpSpec, np.ndarray, nn.Batch]:
    """One random (spec, weights, batch) triple safe for differencing at step h."""
    n_hidden = int(rng.integers(0, 3))
    widths = [int(rng.integers(2, 7)) for _ in range(n_hidden + 2)]
    spec = nn.MlpSpec(tuple(widths), activation)
    batch_size = int(rng.integers(1, 7))
    labels = rng.integers(0, spec.output_dim, batch_size)
    while True:
        w = nn.init_params(spec, rng) + 0.2 * rng.standard_normal(spec.param_count)
        inputs = rng.standard_normal((batch_size, spec.input_dim))
        if activation != "relu":
            break
        if _min_hidden_preactivation(spec, w, inputs) > 100.0 * h:
            break
    return spec, w, nn.Batch(inputs, labels)


@dataclass(frozen=True)
class GradCheckReport:
    cases: int
    worst_abs_diff: float
    worst_margin: float  # max of |diff| - (atol + rtol*ref); negative means pass
    failures: int

    @property
    def passed(self) -> bool:
        return self.failures == 0


def run_gradient_check(cases: int = 100, seed: int = 0, h: float = 1e-5,
                       rtol: float = 1e-6, atol: float = 1e-8) -> GradCheckReport:
    """Compare analytic and numeric gradients over random cases of both activations."""
    worst_abs = 0.0
    worst_margin = -np.inf
    failures = 0
    for case in range(cases):
        rng = np.random.default_rng(np.random.SeedSequence([seed, case]))
        activation = "relu" if case % 2 == 0 else "tanh"
        spec, w, batch = random_case(rng, activation, h)
        _, analytic = nn.loss_and_grad(spec, w, batch)
        numeric = central_difference_grad(spec, w, batch, h)
        diff = np.abs(analytic - numeric)
        allowed = atol + rtol * np.maximum(np.abs(analytic), np.abs(numeric))
        margin = float((diff - allowed).max())
        worst_abs = max(worst_abs, float(diff.max()))
        worst_margin = max(worst_margin, margin)
        if margin > 0:
            failures += 1
    return GradCheckReport(cases, worst_abs, worst_margin, failures)
