"""Per-round metrics records, the rounds-to-target evaluation and file output.

The headline number of a run is not its final accuracy but how many
communication rounds it took to first reach a target test accuracy; the gain
of the shared-plus-side-objective method over the baselines is the best
baseline's round count divided by its own.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

COLUMNS = ("round", "method", "simple_acc", "complex_acc", "simple_loss",
           "complex_loss", "cum_params", "skipped", "stalled")

NOT_REACHED = "not reached"


@dataclass(frozen=True)
class MetricsRecord:
    """One evaluated round of a run."""

    round: int
    method: str
    simple_acc: float
    complex_acc: float
    simple_loss: float
    complex_loss: float
    cum_params: int
    skipped: int
    stalled: bool


def rounds_to_target(trace: Sequence[tuple[int, float]], target: float) -> int | None:
    """First round whose accuracy meets the target; None when never reached.

    The trace must be sorted by round. First crossing counts: the accuracy
    does not have to stay above the target afterwards.
    """
    if not trace:
        raise ValueError("empty trace")
    for round_no, acc in trace:
        if acc >= target:
            return round_no
    return None


def compute_gain(rounds_by_method: Mapping[str, int | None]) -> float | None:
    """Best baseline rounds divided by fedhen rounds; None if anyone fell short."""
    if "fedhen" not in rounds_by_method:
        raise ValueError("gain needs a fedhen entry")
    baselines = {m: r for m, r in rounds_by_method.items() if m != "fedhen"}
    if not baselines:
        raise ValueError("gain needs at least one baseline entry")
    if any(r is None for r in rounds_by_method.values()):
        return None
    return min(baselines.values()) / rounds_by_method["fedhen"]


def format_gain(gain: float | None) -> str:
    return "n/a" if gain is None else f"{gain:.1f}×"


def write_metrics(records: Iterable[MetricsRecord], path) -> None:
    """Write records as CSV with a fixed column order and 6-decimal floats."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(COLUMNS)
            for rec in records:
                writer.writerow([
                    rec.round, rec.method,
                    f"{rec.simple_acc:.6f}", f"{rec.complex_acc:.6f}",
                    f"{rec.simple_loss:.6f}", f"{rec.complex_loss:.6f}",
                    rec.cum_params, rec.skipped, int(rec.stalled),
                ])
    except OSError as exc:
        raise OSError(f"cannot write metrics to {path}: {exc}") from None


def read_metrics(path) -> list[MetricsRecord]:
    """Parse a metrics CSV back into records."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise ValueError(f"{path}: not a metrics file (unexpected header)")
        records = []
        for row in reader:
            if len(row) != len(COLUMNS):
                raise ValueError(f"{path}: malformed row {row!r}")
            records.append(MetricsRecord(
                round=int(row[0]), method=row[1],
                simple_acc=float(row[2]), complex_acc=float(row[3]),
                simple_loss=float(row[4]), complex_loss=float(row[5]),
                cum_params=int(row[6]), skipped=int(row[7]),
                stalled=bool(int(row[8])),
            ))
    return records


def accuracy_trace(records: Sequence[MetricsRecord], model: str) -> list[tuple[int, float]]:
    """(round, accuracy) pairs for one of the two server models."""
    if model not in ("simple", "complex"):
        raise ValueError("model must be 'simple' or 'complex'")
    attr = "simple_acc" if model == "simple" else "complex_acc"
    return [(rec.round, getattr(rec, attr)) for rec in records]


@dataclass(frozen=True)
class TargetRow:
    """Rounds-to-target for one (model, target) pair across all methods."""

    model: str
    target: float
    rounds: dict[str, int | None]
    gain: float | None


def build_target_report(runs: Mapping[str, Sequence[MetricsRecord]],
                        targets: Sequence[float],
                        model_kinds: Sequence[str] = ("simple", "complex"),
                        ) -> list[TargetRow]:
    """Cross the traces of several runs (one per method) with target accuracies."""
    rows = []
    for model in model_kinds:
        for target in targets:
            rounds = {
                method: rounds_to_target(accuracy_trace(records, model), target)
                for method, records in runs.items()
            }
            gain = compute_gain(rounds) if "fedhen" in rounds and len(rounds) > 1 else None
            rows.append(TargetRow(model, target, rounds, gain))
    return rows


def render_target_report(rows: Sequence[TargetRow]) -> str:
    """Aligned text table of a target report."""
    methods = sorted({m for row in rows for m in row.rounds},
                     key=lambda m: (m != "fedhen", m))
    header = ["model", "target"] + methods + ["gain"]
    table = [header]
    for row in rows:
        cells = [row.model, f"{row.target:.4f}"]
        cells += [
            NOT_REACHED if row.rounds.get(m) is None else str(row.rounds[m])
            for m in methods
        ]
        cells.append(format_gain(row.gain))
        table.append(cells)
    widths = [max(len(line[i]) for line in table) for i in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip()
        for line in table
    )


def write_target_report(rows: Sequence[TargetRow], path) -> None:
    """Machine-readable form of a target report."""
    methods = sorted({m for row in rows for m in row.rounds},
                     key=lambda m: (m != "fedhen", m))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "target"] + [f"rounds_{m}" for m in methods] + ["gain"])
        for row in rows:
            cells = [row.model, f"{row.target:.6f}"]
            cells += ["" if row.rounds.get(m) is None else str(row.rounds[m])
                      for m in methods]
            cells.append("" if row.gain is None else f"{row.gain:.6f}")
            writer.writerow(cells)
