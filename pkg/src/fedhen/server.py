"""Server-side model construction from one round's uploads.

Two rules are implemented. The shared rule builds the simple model from every
active device (simple uploads plus the sub-net of complex uploads, uniformly
weighted), writes it back into the complex model's sub-net coordinates, and
averages the remaining complex coordinates over the complex uploads alone.
The decoupled rule runs two independent per-architecture averages.

Sums always run in ascending device-id order so results do not depend on the
order uploads arrive in, and devices flagged as failed neither contribute to
any sum nor count toward any divisor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import models


@dataclass
class RoundUploads:
    """Models transmitted back in one round, plus the ids rejected by the guard."""

    simple_models: list[tuple[int, np.ndarray]]
    complex_models: list[tuple[int, np.ndarray]]
    failed: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        ids = [d for d, _ in self.simple_models] + [d for d, _ in self.complex_models]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate device id in uploads")

    def surviving_simple(self) -> list[tuple[int, np.ndarray]]:
        return sorted(
            ((d, w) for d, w in self.simple_models if d not in self.failed))

    def surviving_complex(self) -> list[tuple[int, np.ndarray]]:
        return sorted(
            ((d, w) for d, w in self.complex_models if d not in self.failed))


def _mean_in_id_order(contributions: list[tuple[int, np.ndarray]]) -> np.ndarray:
    ordered = sorted(contributions)
    acc = np.array(ordered[0][1], dtype=np.float64)
    for _, vec in ordered[1:]:
        acc = acc + vec
    return acc / len(ordered)


def aggregate_shared(uploads: RoundUploads, prev_ws: np.ndarray, prev_wc: np.ndarray,
                     subnet_idx: np.ndarray, complement_idx: np.ndarray
                     ) -> tuple[np.ndarray, np.ndarray, bool]:
    """Shared construction of the next (simple, complex) server pair.

    Returns (w_s, w_c, stalled). The simple model averages all surviving
    uploads with uniform 1/|Z| weights; the complex model's sub-net is then
    set equal to it, which pins the coupling residual to exactly zero. Its
    complement averages the surviving complex uploads, or keeps the previous
    values when no complex upload survived. If nothing survived at all the
    previous pair is returned with the stalled flag set.
    """
    simple = uploads.surviving_simple()
    complex_ = uploads.surviving_complex()
    if not simple and not complex_:
        return prev_ws.copy(), prev_wc.copy(), True

    contributions = simple + [(d, models.project(w, subnet_idx)) for d, w in complex_]
    w_s = _mean_in_id_order(contributions)

    w_c = np.array(prev_wc, dtype=np.float64)
    if complex_:
        rest = [(d, models.project(w, complement_idx)) for d, w in complex_]
        w_c[complement_idx] = _mean_in_id_order(rest)
    w_c[subnet_idx] = w_s
    return w_s, w_c, False


def aggregate_decoupled(uploads: RoundUploads, prev_ws: np.ndarray,
                        prev_wc: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """Independent per-architecture averaging; no coupling between the models.

    Each side averages its own surviving uploads and keeps the previous server
    value when it has none. Stalls only when nothing survived on either side.
    """
    simple = uploads.surviving_simple()
    complex_ = uploads.surviving_complex()
    if not simple and not complex_:
        return prev_ws.copy(), prev_wc.copy(), True
    w_s = _mean_in_id_order(simple) if simple else prev_ws.copy()
    w_c = _mean_in_id_order(complex_) if complex_ else prev_wc.copy()
    return w_s, w_c, False
