"""Nested architecture pair: a simple classifier embedded inside a complex one.

The complex parameter vector is laid out as four consecutive layer blocks:

    [trunk][exit head][extension][complex head]

The simple model is trunk + exit head, so the index set selecting it is the
first two blocks. The complex model's own forward path is trunk + extension +
complex head; the exit head is an auxiliary branch that only the embedded
simple model (and its training objective) ever touches. When extension and
complex head are both empty the two models coincide.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import nn


def _segment_params(widths: tuple[int, ...]) -> int:
    return sum(fi * fo + fo for fi, fo in zip(widths[:-1], widths[1:]))


def _chain(*segments: tuple[int, ...]) -> tuple[int, ...]:
    """Concatenate width lists, dropping the repeated junction width."""
    out: list[int] = []
    for seg in segments:
        if not seg:
            continue
        out.extend(seg if not out else seg[1:])
    return tuple(out)


@dataclass(frozen=True)
class NestedArchSpec:
    """Width lists for the four blocks plus the class count shared by both heads."""

    trunk_widths: tuple[int, ...]
    exit_head_widths: tuple[int, ...]
    extension_widths: tuple[int, ...] = ()
    complex_head_widths: tuple[int, ...] = ()
    n_classes: int = 2
    activation: str = "relu"

    def __post_init__(self):
        for name in ("trunk_widths", "exit_head_widths", "extension_widths",
                     "complex_head_widths"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        trunk, exit_head = self.trunk_widths, self.exit_head_widths
        extension, complex_head = self.extension_widths, self.complex_head_widths
        if len(trunk) < 2:
            raise ValueError("trunk needs at least input and output widths")
        if len(exit_head) < 2:
            raise ValueError("exit head needs at least input and output widths")
        if exit_head[0] != trunk[-1]:
            raise ValueError("exit head must start at the trunk output width")
        if exit_head[-1] != self.n_classes:
            raise ValueError("exit head must end in n_classes")
        if extension and extension[0] != trunk[-1]:
            raise ValueError("extension must start at the trunk output width")
        if extension and not complex_head:
            raise ValueError("an extension requires a complex head ending in n_classes")
        if complex_head:
            expected = extension[-1] if extension else trunk[-1]
            if complex_head[0] != expected:
                raise ValueError("complex head must start where the deeper path ends")
            if complex_head[-1] != self.n_classes:
                raise ValueError("complex head must end in n_classes")
        if self.activation not in nn.ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def degenerate(self) -> bool:
        """True when the complex model is exactly the simple model."""
        return not self.extension_widths and not self.complex_head_widths

    @cached_property
    def simple_spec(self) -> nn.MlpSpec:
        return nn.MlpSpec(_chain(self.trunk_widths, self.exit_head_widths),
                          self.activation)

    @cached_property
    def complex_path_spec(self) -> nn.MlpSpec:
        """Architecture of the complex model's own forward path."""
        if self.degenerate:
            return self.simple_spec
        return nn.MlpSpec(_chain(self.trunk_widths, self.extension_widths,
                                 self.complex_head_widths), self.activation)

    @cached_property
    def param_count(self) -> int:
        return sum(_segment_params(seg) for seg in
                   (self.trunk_widths, self.exit_head_widths,
                    self.extension_widths, self.complex_head_widths))

    @cached_property
    def simple_param_count(self) -> int:
        return _segment_params(self.trunk_widths) + _segment_params(self.exit_head_widths)

    @cached_property
    def subnet_indices(self) -> np.ndarray:
        """Coordinates of the embedded simple model inside the complex vector."""
        idx = np.arange(self.simple_param_count, dtype=np.int64)
        idx.setflags(write=False)
        return idx

    @cached_property
    def complement_indices(self) -> np.ndarray:
        """Coordinates exclusive to the complex model (extension + complex head)."""
        idx = np.arange(self.simple_param_count, self.param_count, dtype=np.int64)
        idx.setflags(write=False)
        return idx

    @cached_property
    def complex_path_indices(self) -> np.ndarray:
        """Coordinates of the complex forward path, in its own spec's layout order."""
        trunk_params = _segment_params(self.trunk_widths)
        if self.degenerate:
            idx = np.arange(self.simple_param_count, dtype=np.int64)
        else:
            idx = np.concatenate([
                np.arange(trunk_params, dtype=np.int64),
                np.arange(self.simple_param_count, self.param_count, dtype=np.int64),
            ])
        idx.setflags(write=False)
        return idx


def build_index_map(spec: NestedArchSpec) -> tuple[np.ndarray, np.ndarray]:
    """Index set of the embedded simple model and its complement.

    The two sets partition range(param_count); the first has exactly
    simple_param_count entries.
    """
    return spec.subnet_indices, spec.complement_indices


def _check_indices(indices, length: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError("index set must be one-dimensional")
    if idx.size and (idx.min() < 0 or idx.max() >= length):
        raise ValueError(f"index out of range for vector of length {length}")
    return idx


def project(w_c, indices) -> np.ndarray:
    """Gather the coordinates named by the index set, in index order."""
    w_c = np.asarray(w_c, dtype=np.float64)
    return w_c[_check_indices(indices, w_c.size)]


def embed_into(w_c, indices, w_s) -> np.ndarray:
    """Copy of w_c with the indexed coordinates overwritten by w_s."""
    w_c = np.asarray(w_c, dtype=np.float64)
    idx = _check_indices(indices, w_c.size)
    w_s = np.asarray(w_s, dtype=np.float64)
    if w_s.size != idx.size:
        raise ValueError(f"got {w_s.size} values for {idx.size} indices")
    out = w_c.copy()
    out[idx] = w_s
    return out


def constraint_residual(w_s, w_c, indices) -> float:
    """Squared distance between the simple model and the complex model's sub-net."""
    w_s = np.asarray(w_s, dtype=np.float64)
    diff = w_s - project(w_c, indices)
    if diff.size != w_s.size:
        raise ValueError("length mismatch between w_s and the index set")
    return float(diff @ diff)


def _check_complex_weights(spec: NestedArchSpec, w_c) -> np.ndarray:
    w_c = np.asarray(w_c, dtype=np.float64)
    if w_c.ndim != 1 or w_c.size != spec.param_count:
        raise ValueError(
            f"complex weight vector has {w_c.size} entries, spec needs {spec.param_count}"
        )
    return w_c


def simple_forward(spec: NestedArchSpec, w_c, inputs) -> np.ndarray:
    """Logits of the embedded simple model, read straight out of complex weights."""
    w_c = _check_complex_weights(spec, w_c)
    return nn.forward_logits(spec.simple_spec, w_c[spec.subnet_indices], inputs)


def complex_forward(spec: NestedArchSpec, w_c, inputs) -> np.ndarray:
    """Logits of the complex model's own path (the exit head plays no part)."""
    w_c = _check_complex_weights(spec, w_c)
    return nn.forward_logits(spec.complex_path_spec, w_c[spec.complex_path_indices],
                             inputs)


def complex_loss_and_grad(spec: NestedArchSpec, w_c, batch: nn.Batch
                          ) -> tuple[float, np.ndarray]:
    """Loss and full-length gradient of the complex path; zero on the exit head."""
    w_c = _check_complex_weights(spec, w_c)
    idx = spec.complex_path_indices
    loss, g_path = nn.loss_and_grad(spec.complex_path_spec, w_c[idx], batch)
    grad = np.zeros(spec.param_count, dtype=np.float64)
    grad[idx] = g_path
    return loss, grad


def side_loss_and_grad(spec: NestedArchSpec, w_c, batch: nn.Batch
                       ) -> tuple[float, np.ndarray]:
    """Loss and full-length gradient of the embedded simple model.

    The returned gradient is supported on the sub-net coordinates only; every
    complement coordinate is exactly zero.
    """
    w_c = _check_complex_weights(spec, w_c)
    idx = spec.subnet_indices
    loss, g_sub = nn.loss_and_grad(spec.simple_spec, w_c[idx], batch)
    grad = np.zeros(spec.param_count, dtype=np.float64)
    grad[idx] = g_sub
    return loss, grad


def init_complex_params(spec: NestedArchSpec, rng: np.random.Generator) -> np.ndarray:
    """Initialize the full complex vector block by block, in layout order."""
    parts = [
        nn.init_params(nn.MlpSpec(seg, spec.activation), rng)
        for seg in (spec.trunk_widths, spec.exit_head_widths,
                    spec.extension_widths, spec.complex_head_widths)
        if seg
    ]
    return np.concatenate(parts)
