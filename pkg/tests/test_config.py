"""Tests for the configuration document parser and its validation."""

import pytest

from fedhen import ExperimentConfig, parse_config


class TestDefaults:
    def test_empty_document_yields_full_defaults(self):
        run = parse_config("")
        exp = run.experiment
        assert exp.method == "fedhen"
        assert exp.rounds == 1000
        assert exp.participation_rate == 0.1
        assert exp.n_devices == 100
        assert exp.n_simple == 50
        assert exp.seed == 0
        assert exp.report_mode == "server"
        assert exp.eval_every == 1
        assert exp.split == "iid"
        assert exp.alpha == 0.3
        assert exp.client.epochs == 5
        assert exp.client.eta == 0.1
        assert exp.client.batch_size == 50
        assert exp.client.clip_norm == 10.0
        assert exp.client.side_coeff == 1.0
        assert exp.arch.trunk_widths == (20, 32)
        assert exp.arch.n_classes == 10
        assert run.data.source == "synthetic"
        assert run.data.n == 10000
        assert run.data.n_test == 2000
        assert run.output.metrics_path == "metrics.csv"
        assert run.output.checkpoint_dir is None

    def test_n_simple_defaults_to_half(self):
        run = parse_config("[experiment]\nn_devices = 30\n")
        assert run.experiment.n_simple == 15


class TestParsing:
    def test_full_document(self):
        text = """
[experiment]
method = decouple
rounds = 25
participation_rate = 0.5
n_devices = 20
n_simple = 10
seed = 3
report_mode = all_device_average
eval_every = 5

[model]
trunk = 8,16
exit_head = 16,4
extension = 16,16
complex_head = 16,4
activation = tanh

[client]
epochs = 2
eta = 0.05
batch_size = 16
clip_norm = none
side_coeff = 0.5

[data]
source = synthetic
n = 500
n_test = 100
d = 8
n_classes = 4
split = dirichlet
alpha = 0.7

[output]
metrics_path = out.csv
checkpoint_dir = ckpt
"""
        run = parse_config(text)
        exp = run.experiment
        assert exp.method == "decouple"
        assert exp.rounds == 25
        assert exp.report_mode == "all_device_average"
        assert exp.arch.activation == "tanh"
        assert exp.arch.extension_widths == (16, 16)
        assert exp.client.clip_norm is None
        assert exp.client.side_coeff == 0.5
        assert exp.split == "dirichlet" and exp.alpha == 0.7
        assert run.data.dim == 8
        assert run.output.checkpoint_dir == "ckpt"

    def test_unknown_method_named(self):
        with pytest.raises(ValueError, match="unknown method 'fedavg'"):
            parse_config("[experiment]\nmethod = fedavg\n")

    def test_zero_participation_range_error(self):
        with pytest.raises(ValueError, match="participation_rate"):
            parse_config("[experiment]\nparticipation_rate = 0\n")

    def test_unknown_key_named(self):
        with pytest.raises(ValueError, match="experiment.learning_rate"):
            parse_config("[experiment]\nlearning_rate = 1\n")

    def test_unknown_section_named(self):
        with pytest.raises(ValueError, match=r"\[tuning\]"):
            parse_config("[tuning]\nx = 1\n")

    def test_type_error_named(self):
        with pytest.raises(ValueError, match="experiment.rounds"):
            parse_config("[experiment]\nrounds = soon\n")

    def test_head_class_mismatch_rejected(self):
        with pytest.raises(ValueError, match="model"):
            parse_config("[model]\nexit_head = 32,7\n")

    def test_csv_source_requires_paths(self):
        with pytest.raises(ValueError, match="data"):
            parse_config("[data]\nsource = csv\n")

    def test_nonpositive_eta_rejected(self):
        with pytest.raises(ValueError, match="client"):
            parse_config("[client]\neta = 0\n")

    def test_n_simple_bounds(self):
        with pytest.raises(ValueError, match="n_simple"):
            parse_config("[experiment]\nn_devices = 10\nn_simple = 11\n")


class TestExperimentConfig:
    def test_invalid_eval_every(self):
        with pytest.raises(ValueError, match="eval_every"):
            ExperimentConfig(eval_every=0)

    def test_invalid_split(self):
        with pytest.raises(ValueError, match="split"):
            ExperimentConfig(split="sorted")

    def test_negative_seed(self):
        with pytest.raises(ValueError, match="seed"):
            ExperimentConfig(seed=-1)
