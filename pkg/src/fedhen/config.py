"""Experiment configuration: the dataclasses and the key=value document parser.

A run is described by an INI-style document with sections [experiment],
[model], [client], [data] and [output]. Parsing is total: every document
either yields a fully-validated configuration or an error naming the
offending key. An empty document yields the full set of defaults
(1000 rounds, 5 local epochs, eta 0.1, clip norm 10, 10% participation,
100 devices with the first 50 simple, Dirichlet alpha 0.3, batch 50,
side coefficient 1).
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field

from .client import ClientConfig
from .models import NestedArchSpec
from .nn import ACTIVATIONS

METHODS = ("fedhen", "noside", "decouple")
REPORT_MODES = ("server", "all_device_average")
SPLITS = ("iid", "dirichlet")
DATA_SOURCES = ("synthetic", "csv")


def active_count(participation_rate: float, n_devices: int) -> int:
    """Devices sampled per round: ceil(rate * N), robust to float dust."""
    return int(math.ceil(participation_rate * n_devices - 1e-9))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything the round loop needs; data loading lives in DataConfig."""

    method: str = "fedhen"
    rounds: int = 1000
    participation_rate: float = 0.1
    n_devices: int = 100
    n_simple: int = 50
    arch: NestedArchSpec = field(default_factory=lambda: NestedArchSpec(
        (20, 32), (32, 10), (32, 32), (32, 10), n_classes=10))
    client: ClientConfig = field(default_factory=ClientConfig)
    split: str = "iid"
    alpha: float = 0.3
    seed: int = 0
    report_mode: str = "server"
    eval_every: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if not 0.0 < self.participation_rate <= 1.0:
            raise ValueError("participation_rate must be in (0, 1]")
        if self.n_devices < 1:
            raise ValueError("n_devices must be >= 1")
        if not 1 <= self.n_simple <= self.n_devices:
            raise ValueError("n_simple must be in [1, n_devices]")
        if active_count(self.participation_rate, self.n_devices) < 1:
            raise ValueError("participation_rate samples no devices")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.report_mode not in REPORT_MODES:
            raise ValueError(f"unknown report_mode {self.report_mode!r}")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")


@dataclass(frozen=True)
class DataConfig:
    """Where the train/test datasets come from."""

    source: str = "synthetic"
    n: int = 10000
    n_test: int = 2000
    dim: int = 20
    n_classes: int = 10
    path: str | None = None
    test_path: str | None = None

    def __post_init__(self):
        if self.source not in DATA_SOURCES:
            raise ValueError(f"unknown data source {self.source!r}")
        if self.source == "synthetic":
            if self.n < 1 or self.n_test < 1:
                raise ValueError("n and n_test must be >= 1")
            if self.dim < 1 or self.n_classes < 2:
                raise ValueError("need dim >= 1 and n_classes >= 2")
        else:
            if not self.path or not self.test_path:
                raise ValueError("csv source requires both path and test_path")


@dataclass(frozen=True)
class OutputConfig:
    metrics_path: str = "metrics.csv"
    checkpoint_dir: str | None = None


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentConfig
    data: DataConfig
    output: OutputConfig


_KNOWN_KEYS = {
    "experiment": ("method", "rounds", "participation_rate", "n_devices",
                   "n_simple", "seed", "report_mode", "eval_every"),
    "model": ("trunk", "exit_head", "extension", "complex_head", "activation"),
    "client": ("epochs", "eta", "batch_size", "clip_norm", "side_coeff"),
    "data": ("source", "n", "n_test", "d", "n_classes", "split", "alpha",
             "path", "test_path"),
    "output": ("metrics_path", "checkpoint_dir"),
}


class _Section:
    def __init__(self, name: str, values: dict[str, str]):
        self.name = name
        self.values = values

    def _raw(self, key: str) -> str | None:
        value = self.values.get(key)
        if value is None or value.strip() == "":
            return None
        return value.strip()

    def text(self, key: str, default: str | None) -> str | None:
        raw = self._raw(key)
        return default if raw is None else raw

    def integer(self, key: str, default: int) -> int:
        raw = self._raw(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ValueError(f"{self.name}.{key}: expected an integer, got {raw!r}") from None

    def real(self, key: str, default: float) -> float:
        raw = self._raw(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ValueError(f"{self.name}.{key}: expected a number, got {raw!r}") from None

    def choice(self, key: str, default: str, allowed: tuple[str, ...],
               what: str = "value") -> str:
        raw = self._raw(key)
        if raw is None:
            return default
        if raw not in allowed:
            raise ValueError(
                f"{self.name}.{key}: unknown {what} {raw!r} (expected one of {', '.join(allowed)})")
        return raw

    def widths(self, key: str, default: tuple[int, ...]) -> tuple[int, ...]:
        raw = self._raw(key)
        if raw is None:
            return default
        try:
            return tuple(int(part) for part in raw.split(","))
        except ValueError:
            raise ValueError(
                f"{self.name}.{key}: expected comma-separated integers, got {raw!r}") from None

    def optional_real(self, key: str, default: float | None) -> float | None:
        raw = self._raw(key)
        if raw is None:
            return default
        if raw.lower() == "none":
            return None
        try:
            return float(raw)
        except ValueError:
            raise ValueError(f"{self.name}.{key}: expected a number or 'none', got {raw!r}") from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document; see the module docstring."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_file(io.StringIO(text))
    except configparser.Error as exc:
        raise ValueError(f"malformed config: {exc}") from None

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ValueError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ValueError(f"unknown key {section}.{key}")

    def section(name: str) -> _Section:
        return _Section(name, dict(parser[name]) if parser.has_section(name) else {})

    exp = section("experiment")
    model = section("model")
    cli = section("client")
    dat = section("data")
    out = section("output")

    trunk = model.widths("trunk", (20, 32))
    exit_head = model.widths("exit_head", (32, 10))
    extension = model.widths("extension", (32, 32))
    complex_head = model.widths("complex_head", (32, 10))
    n_classes = dat.integer("n_classes", 10)
    try:
        arch = NestedArchSpec(
            trunk, exit_head, extension, complex_head, n_classes=n_classes,
            activation=model.choice("activation", "relu", ACTIVATIONS, "activation"),
        )
    except ValueError as exc:
        raise ValueError(f"model: {exc}") from None

    try:
        client = ClientConfig(
            epochs=cli.integer("epochs", 5),
            eta=cli.real("eta", 0.1),
            batch_size=cli.integer("batch_size", 50),
            clip_norm=cli.optional_real("clip_norm", 10.0),
            side_coeff=cli.real("side_coeff", 1.0),
        )
        if client.eta <= 0:
            raise ValueError("eta must be positive")
    except ValueError as exc:
        raise ValueError(f"client: {exc}") from None

    n_devices = exp.integer("n_devices", 100)
    try:
        experiment = ExperimentConfig(
            method=exp.choice("method", "fedhen", METHODS, "method"),
            rounds=exp.integer("rounds", 1000),
            participation_rate=exp.real("participation_rate", 0.1),
            n_devices=n_devices,
            n_simple=exp.integer("n_simple", n_devices // 2),
            arch=arch,
            client=client,
            split=dat.choice("split", "iid", SPLITS, "split"),
            alpha=dat.real("alpha", 0.3),
            seed=exp.integer("seed", 0),
            report_mode=exp.choice("report_mode", "server", REPORT_MODES, "report_mode"),
            eval_every=exp.integer("eval_every", 1),
        )
    except ValueError as exc:
        raise ValueError(f"experiment: {exc}") from None

    try:
        data = DataConfig(
            source=dat.choice("source", "synthetic", DATA_SOURCES, "data source"),
            n=dat.integer("n", 10000),
            n_test=dat.integer("n_test", 2000),
            dim=dat.integer("d", 20),
            n_classes=n_classes,
            path=dat.text("path", None),
            test_path=dat.text("test_path", None),
        )
    except ValueError as exc:
        raise ValueError(f"data: {exc}") from None

    output = OutputConfig(
        metrics_path=out.text("metrics_path", "metrics.csv"),
        checkpoint_dir=out.text("checkpoint_dir", None),
    )
    return RunConfig(experiment, data, output)
