"""Deterministic federated-learning simulator for heterogeneous device tiers.

A simple architecture lives as a sub-network inside a complex one; complex
devices can train the embedded simple model alongside their own objective,
and the server shares the sub-network weights between the two models. The
package bundles the dense-network engine, the nested-architecture machinery,
IID/Dirichlet data partitioning, the round loop for the fedhen, noside and
decouple methods, a rounds-to-target metrics pipeline, a CLI and a
scikit-learn estimator facade.
"""

from .client import ClientConfig, client_training, client_training_side_obj
from .config import (DataConfig, ExperimentConfig, OutputConfig, RunConfig,
                     parse_config)
from .data import (Dataset, DevicePartition, gen_synthetic, load_csv,
                   partition_report, split_dirichlet, split_iid, subset)
from .estimator import FederatedHeteroClassifier
from .gradcheck import central_difference_grad, run_gradient_check
from .metrics import (MetricsRecord, TargetRow, build_target_report,
                      compute_gain, format_gain, read_metrics,
                      render_target_report, rounds_to_target, write_metrics)
from .models import (NestedArchSpec, build_index_map, complex_forward,
                     constraint_residual, embed_into, init_complex_params,
                     project, simple_forward)
from .nn import (Batch, MlpSpec, clip_global_norm, forward_logits, init_params,
                 load_weights, loss_and_grad, save_weights, sgd_update,
                 softmax_cross_entropy)
from .server import RoundUploads, aggregate_decoupled, aggregate_shared
from .simulation import (RoundState, build_partition, evaluate, init_state,
                         nan_guard, run_experiment, run_round, run_simulation,
                         sample_active)

__version__ = "0.1.0"

__all__ = [
    "Batch", "ClientConfig", "DataConfig", "Dataset", "DevicePartition",
    "ExperimentConfig", "FederatedHeteroClassifier", "MetricsRecord", "MlpSpec",
    "NestedArchSpec", "OutputConfig", "RoundState", "RoundUploads", "RunConfig",
    "TargetRow", "aggregate_decoupled", "aggregate_shared", "build_index_map",
    "build_partition", "build_target_report", "central_difference_grad",
    "client_training", "client_training_side_obj", "clip_global_norm",
    "complex_forward", "compute_gain", "constraint_residual", "embed_into",
    "evaluate", "format_gain", "forward_logits", "gen_synthetic",
    "init_complex_params", "init_params", "init_state", "load_csv",
    "load_weights", "loss_and_grad", "nan_guard", "parse_config",
    "partition_report", "project", "read_metrics", "render_target_report",
    "rounds_to_target", "run_experiment", "run_gradient_check", "run_round",
    "run_simulation", "sample_active", "save_weights", "sgd_update",
    "simple_forward", "softmax_cross_entropy", "split_dirichlet", "split_iid",
    "subset", "write_metrics",
]
