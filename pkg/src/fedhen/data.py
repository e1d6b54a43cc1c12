"""Classification datasets and their partitioning across simulated devices."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass
class Dataset:
    """Feature matrix, integer labels and the class count they range over."""

    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2:
            raise ValueError("inputs must be a (n x d) matrix")
        if self.labels.shape != (self.inputs.shape[0],):
            raise ValueError("need exactly one label per row")
        if self.inputs.shape[0] < 1:
            raise ValueError("empty dataset")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise ValueError(f"labels must lie in [0, {self.n_classes})")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]


def subset(ds: Dataset, indices) -> Dataset:
    """Dataset restricted to the given row indices (class count is kept)."""
    idx = np.asarray(indices, dtype=np.int64)
    return Dataset(ds.inputs[idx], ds.labels[idx], ds.n_classes)


def gen_synthetic(n: int, dim: int, n_classes: int, rng: np.random.Generator,
                  sigma: float = 0.35) -> Dataset:
    """Class-conditional Gaussian blobs with means drawn uniform in [-1, 1]^dim.

    Every class is guaranteed to occur at least once. sigma=0 collapses each
    class onto its mean, which makes the classes exactly separable.
    """
    if n_classes < 1 or dim < 1:
        raise ValueError("need at least one class and one feature")
    if n < n_classes:
        raise ValueError(f"cannot place {n_classes} classes in {n} points")
    means = rng.uniform(-1.0, 1.0, (n_classes, dim))
    labels = rng.integers(0, n_classes, n)
    if np.unique(labels).size < n_classes:
        labels[:n_classes] = np.arange(n_classes)
    inputs = means[labels] + sigma * rng.standard_normal((n, dim))
    return Dataset(inputs, labels, n_classes)


def load_csv(path) -> Dataset:
    """Parse a dataset from CSV rows of d feature columns plus an integer label.

    A single header row is tolerated and skipped. Ragged rows, non-numeric
    features and non-integer or negative labels are rejected with the
    offending line number; the class count is inferred as max label + 1.
    """
    rows: list[tuple[int, list[str]]] = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if row and any(cell.strip() for cell in row):
                rows.append((lineno, [cell.strip() for cell in row]))
    if rows and not _is_numeric_row(rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: empty dataset")

    width = len(rows[0][1])
    if width < 2:
        raise ValueError(f"{path}: line {rows[0][0]}: need at least one feature column")
    inputs = np.empty((len(rows), width - 1), dtype=np.float64)
    labels = np.empty(len(rows), dtype=np.int64)
    for i, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"{path}: line {lineno}: expected {width} columns, got {len(row)}")
        for j, cell in enumerate(row[:-1]):
            try:
                inputs[i, j] = float(cell)
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric feature {cell!r}") from None
        try:
            value = float(row[-1])
        except ValueError:
            raise ValueError(f"{path}: line {lineno}: non-numeric label {row[-1]!r}") from None
        if not value.is_integer() or value < 0:
            raise ValueError(f"{path}: line {lineno}: label must be a non-negative integer")
        labels[i] = int(value)
    return Dataset(inputs, labels, int(labels.max()) + 1)


def _is_numeric_row(row: list[str]) -> bool:
    try:
        for cell in row:
            float(cell)
    except ValueError:
        return False
    return True


@dataclass
class DevicePartition:
    """Disjoint row-index shards, one per device; the first n_simple devices
    carry the simple architecture, the rest the complex one."""

    shards: list[np.ndarray]
    n_simple: int = 0

    def __post_init__(self):
        self.shards = [np.asarray(s, dtype=np.int64) for s in self.shards]
        if not 0 <= self.n_simple <= len(self.shards):
            raise ValueError("n_simple out of range")

    @property
    def n_devices(self) -> int:
        return len(self.shards)

    @property
    def simple_ids(self) -> list[int]:
        return list(range(self.n_simple))

    @property
    def complex_ids(self) -> list[int]:
        return list(range(self.n_simple, len(self.shards)))

    def capacity(self, device_id: int) -> str:
        return "simple" if device_id < self.n_simple else "complex"


def split_iid(ds: Dataset, n_devices: int, rng: np.random.Generator,
              n_simple: int = 0) -> DevicePartition:
    """Random permutation cut into n_devices near-equal contiguous shards."""
    if n_devices < 1:
        raise ValueError("need at least one device")
    if n_devices > ds.n:
        raise ValueError(f"cannot split {ds.n} points over {n_devices} devices")
    perm = rng.permutation(ds.n)
    shards = [np.sort(chunk) for chunk in np.array_split(perm, n_devices)]
    return DevicePartition(shards, n_simple)


def split_dirichlet(ds: Dataset, n_devices: int, alpha: float,
                    rng: np.random.Generator, n_simple: int = 0) -> DevicePartition:
    """Label-skewed split: each class is spread over devices by a Dirichlet draw.

    For every class a device weighting p ~ Dirichlet(alpha * 1) is drawn and
    the class's points are dealt out multinomially by p. Devices that end up
    empty are repaired by taking one point from the currently largest shard,
    so every shard is nonempty and the shards still partition the dataset.
    """
    if n_devices < 1:
        raise ValueError("need at least one device")
    if n_devices > ds.n:
        raise ValueError(f"cannot split {ds.n} points over {n_devices} devices")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    counts = np.bincount(ds.labels, minlength=ds.n_classes)
    if counts.min() < 1:
        raise ValueError("every class needs at least one point")

    buckets: list[list[np.ndarray]] = [[] for _ in range(n_devices)]
    for cls in range(ds.n_classes):
        cls_idx = np.flatnonzero(ds.labels == cls)
        rng.shuffle(cls_idx)
        weights = rng.dirichlet(np.full(n_devices, alpha))
        per_device = rng.multinomial(cls_idx.size, weights)
        for device, chunk in enumerate(np.split(cls_idx, np.cumsum(per_device)[:-1])):
            if chunk.size:
                buckets[device].append(chunk)

    shards = [
        np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
        for parts in buckets
    ]
    while True:
        sizes = np.array([s.size for s in shards])
        if sizes.min() > 0:
            break
        needy = int(np.argmin(sizes))
        donor = int(np.argmax(sizes))
        shards[needy] = np.append(shards[needy], shards[donor][-1])
        shards[donor] = shards[donor][:-1]
    return DevicePartition([np.sort(s) for s in shards], n_simple)


def partition_report(ds: Dataset, partition: DevicePartition) -> str:
    """Human-readable per-device summary: capacity, shard size, label histogram."""
    lines = [f"{'device':>6}  {'capacity':<8} {'size':>6}  label histogram"]
    for device, shard in enumerate(partition.shards):
        hist = np.bincount(ds.labels[shard], minlength=ds.n_classes)
        hist_text = " ".join(str(c) for c in hist)
        lines.append(
            f"{device:>6}  {partition.capacity(device):<8} {shard.size:>6}  [{hist_text}]"
        )
    return "\n".join(lines)
