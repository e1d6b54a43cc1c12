"""The T-round federated loop: sampling, client dispatch, guarding, aggregation.

Every source of randomness is a stream derived from (seed, purpose tag, round,
device), so a run is a pure function of its configuration and dataset, clients
may be executed in any order without changing results, and reruns are
bit-identical.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import models, nn, server
from .client import client_training, client_training_side_obj
from .config import ExperimentConfig, active_count
from .data import Dataset, DevicePartition, split_dirichlet, split_iid, subset
from .metrics import MetricsRecord

# stream purpose tags; part of the reproducibility contract
_TAG_PARTITION = 1
_TAG_INIT = 2
_TAG_SAMPLE = 3
_TAG_CLIENT = 4


def _stream(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


@dataclass
class RoundState:
    """Mutable state carried across rounds.

    The per-device cache holds the model each device last transmitted
    successfully (initialized to the initial server model of its capacity);
    it exists purely for the all-device-average reporting mode and never
    feeds back into training.
    """

    t: int
    server_simple: np.ndarray
    server_complex: np.ndarray
    device_cache: list[np.ndarray]
    cum_params: int
    seed: int


@dataclass(frozen=True)
class RoundOutcome:
    skipped: int
    stalled: bool


def nan_guard(w: np.ndarray) -> bool:
    """True when the upload is usable; False if any entry is NaN or infinite."""
    return bool(np.isfinite(w).all())


def build_partition(cfg: ExperimentConfig, train: Dataset) -> DevicePartition:
    rng = _stream(cfg.seed, _TAG_PARTITION)
    if cfg.split == "iid":
        return split_iid(train, cfg.n_devices, rng, n_simple=cfg.n_simple)
    return split_dirichlet(train, cfg.n_devices, cfg.alpha, rng, n_simple=cfg.n_simple)


def init_state(cfg: ExperimentConfig) -> RoundState:
    """Initial server pair with the coupling already satisfied.

    The complex model is initialized first and the simple model is its
    sub-net projection, so the residual is zero from round one.
    """
    w_c = models.init_complex_params(cfg.arch, _stream(cfg.seed, _TAG_INIT))
    w_s = models.project(w_c, cfg.arch.subnet_indices)
    cache = [w_s.copy() if d < cfg.n_simple else w_c.copy()
             for d in range(cfg.n_devices)]
    return RoundState(t=1, server_simple=w_s, server_complex=w_c,
                      device_cache=cache, cum_params=0, seed=cfg.seed)


def sample_active(state: RoundState, cfg: ExperimentConfig) -> tuple[list[int], list[int]]:
    """Sample ceil(rate * N) devices without replacement, split by capacity."""
    rng = _stream(state.seed, _TAG_SAMPLE, state.t)
    count = active_count(cfg.participation_rate, cfg.n_devices)
    active = rng.choice(cfg.n_devices, size=count, replace=False)
    simple = sorted(int(d) for d in active if d < cfg.n_simple)
    complex_ = sorted(int(d) for d in active if d >= cfg.n_simple)
    return simple, complex_


def run_round(state: RoundState, cfg: ExperimentConfig,
              partition: DevicePartition, train: Dataset) -> RoundOutcome:
    """Execute one communication round, mutating the state in place.

    Simple actives run plain local SGD from the server simple model. Complex
    actives start from the server complex model and run the side-objective
    procedure under fedhen, or plain training otherwise. Guarded uploads are
    aggregated by the shared rule (fedhen, noside) or the decoupled rule
    (decouple). Communication is accounted in parameters, download plus
    upload, for every active device.
    """
    arch = cfg.arch
    z_simple, z_complex = sample_active(state, cfg)

    simple_uploads = []
    for device in z_simple:
        shard = subset(train, partition.shards[device])
        rng = _stream(state.seed, _TAG_CLIENT, state.t, device)
        trained = client_training(state.server_simple, shard, arch.simple_spec,
                                  cfg.client, rng)
        simple_uploads.append((device, trained))

    complex_uploads = []
    for device in z_complex:
        shard = subset(train, partition.shards[device])
        rng = _stream(state.seed, _TAG_CLIENT, state.t, device)
        if cfg.method == "fedhen":
            trained = client_training_side_obj(state.server_complex, shard, arch,
                                               cfg.client, rng)
        else:
            trained = client_training(state.server_complex, shard, arch,
                                      cfg.client, rng)
        complex_uploads.append((device, trained))

    failed = frozenset(
        device for device, w in simple_uploads + complex_uploads if not nan_guard(w))
    uploads = server.RoundUploads(simple_uploads, complex_uploads, failed)

    if cfg.method == "decouple":
        w_s, w_c, stalled = server.aggregate_decoupled(
            uploads, state.server_simple, state.server_complex)
    else:
        w_s, w_c, stalled = server.aggregate_shared(
            uploads, state.server_simple, state.server_complex,
            arch.subnet_indices, arch.complement_indices)

    state.server_simple = w_s
    state.server_complex = w_c
    for device, w in simple_uploads + complex_uploads:
        if device not in failed:
            state.device_cache[device] = w
    state.cum_params += 2 * (len(z_simple) * arch.simple_param_count
                             + len(z_complex) * arch.param_count)
    state.t += 1
    return RoundOutcome(skipped=len(failed), stalled=stalled)


def _cache_average(state: RoundState, ids: list[int]) -> np.ndarray:
    acc = state.device_cache[ids[0]].copy()
    for device in ids[1:]:
        acc = acc + state.device_cache[device]
    return acc / len(ids)


def evaluate(state: RoundState, cfg: ExperimentConfig, test: Dataset
             ) -> tuple[float, float, float, float]:
    """Accuracy and loss of the two models on a held-out set.

    In server mode the server pair is evaluated directly. In
    all_device_average mode each model is the mean of its capacity class's
    cached device models; a class with no devices falls back to the server
    model.
    """
    if test.n < 1:
        raise ValueError("empty test set")
    if cfg.report_mode == "server":
        w_s, w_c = state.server_simple, state.server_complex
    else:
        simple_ids = list(range(cfg.n_simple))
        complex_ids = list(range(cfg.n_simple, cfg.n_devices))
        w_s = _cache_average(state, simple_ids) if simple_ids else state.server_simple
        w_c = _cache_average(state, complex_ids) if complex_ids else state.server_complex

    simple_logits = nn.forward_logits(cfg.arch.simple_spec, w_s, test.inputs)
    complex_logits = models.complex_forward(cfg.arch, w_c, test.inputs)
    simple_acc = float(np.mean(simple_logits.argmax(axis=1) == test.labels))
    complex_acc = float(np.mean(complex_logits.argmax(axis=1) == test.labels))
    simple_loss = nn.softmax_cross_entropy(simple_logits, test.labels)
    complex_loss = nn.softmax_cross_entropy(complex_logits, test.labels)
    return simple_acc, complex_acc, simple_loss, complex_loss


def _record(state: RoundState, cfg: ExperimentConfig, test: Dataset,
            round_no: int, outcome: RoundOutcome) -> MetricsRecord:
    simple_acc, complex_acc, simple_loss, complex_loss = evaluate(state, cfg, test)
    return MetricsRecord(
        round=round_no, method=cfg.method,
        simple_acc=simple_acc, complex_acc=complex_acc,
        simple_loss=simple_loss, complex_loss=complex_loss,
        cum_params=state.cum_params, skipped=outcome.skipped,
        stalled=outcome.stalled,
    )


def _dump_checkpoints(state: RoundState, round_no: int, checkpoint_dir) -> None:
    os.makedirs(checkpoint_dir, exist_ok=True)
    nn.save_weights(os.path.join(checkpoint_dir, f"round{round_no:05d}_simple.fhwv"),
                    state.server_simple)
    nn.save_weights(os.path.join(checkpoint_dir, f"round{round_no:05d}_complex.fhwv"),
                    state.server_complex)


def run_simulation(cfg: ExperimentConfig, train: Dataset, test: Dataset,
                   checkpoint_dir=None) -> tuple[RoundState, list[MetricsRecord]]:
    """Full run returning the final state alongside the metrics table.

    The table holds one record for the initial models (round 0) and one per
    evaluation point: every eval_every rounds plus, always, the final round.
    """
    partition = build_partition(cfg, train)
    state = init_state(cfg)
    records = [_record(state, cfg, test, 0, RoundOutcome(0, False))]
    if checkpoint_dir is not None:
        _dump_checkpoints(state, 0, checkpoint_dir)
    for t in range(1, cfg.rounds + 1):
        outcome = run_round(state, cfg, partition, train)
        if t % cfg.eval_every == 0 or t == cfg.rounds:
            records.append(_record(state, cfg, test, t, outcome))
            if checkpoint_dir is not None:
                _dump_checkpoints(state, t, checkpoint_dir)
    return state, records


def run_experiment(cfg: ExperimentConfig, train: Dataset, test: Dataset,
                   checkpoint_dir=None) -> list[MetricsRecord]:
    """Run the configured experiment and return its metrics table."""
    _, records = run_simulation(cfg, train, test, checkpoint_dir)
    return records
