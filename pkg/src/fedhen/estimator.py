"""Scikit-learn estimator facade over the federated simulation.

FederatedHeteroClassifier lets the simulator compose with the wider ecosystem
(pipelines, cross-validation, cloning): fit(X, y) partitions the data over
simulated devices, runs the configured number of communication rounds and
keeps the resulting server pair; predict serves either the complex or the
simple server model.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import models, nn
from .client import ClientConfig
from .config import ExperimentConfig
from .data import Dataset
from .simulation import run_simulation


class FederatedHeteroClassifier(BaseEstimator, ClassifierMixin):
    """Classifier trained by simulated federated rounds over two device tiers.

    Parameters mirror the experiment configuration; trunk_hidden and
    extension_hidden give hidden widths only, the input dimension and class
    count are inferred from the data at fit time. Both heads are single
    linear layers onto the class logits.
    """

    def __init__(self, method="fedhen", rounds=50, participation_rate=0.5,
                 n_devices=20, n_simple=10, trunk_hidden=(32,),
                 extension_hidden=(32,), activation="relu", epochs=5, eta=0.1,
                 batch_size=50, clip_norm=10.0, side_coeff=1.0, split="iid",
                 alpha=0.3, report_mode="server", eval_every=None,
                 predict_model="complex", seed=0):
        self.method = method
        self.rounds = rounds
        self.participation_rate = participation_rate
        self.n_devices = n_devices
        self.n_simple = n_simple
        self.trunk_hidden = trunk_hidden
        self.extension_hidden = extension_hidden
        self.activation = activation
        self.epochs = epochs
        self.eta = eta
        self.batch_size = batch_size
        self.clip_norm = clip_norm
        self.side_coeff = side_coeff
        self.split = split
        self.alpha = alpha
        self.report_mode = report_mode
        self.eval_every = eval_every
        self.predict_model = predict_model
        self.seed = seed

    def _build_arch(self, dim: int, n_classes: int) -> models.NestedArchSpec:
        trunk_hidden = tuple(int(w) for w in self.trunk_hidden)
        extension_hidden = tuple(int(w) for w in self.extension_hidden)
        if not trunk_hidden:
            raise ValueError("trunk_hidden needs at least one width")
        trunk = (dim,) + trunk_hidden
        exit_head = (trunk_hidden[-1], n_classes)
        extension = ((trunk_hidden[-1],) + extension_hidden) if extension_hidden else ()
        head_in = extension[-1] if extension else trunk_hidden[-1]
        complex_head = (head_in, n_classes)
        return models.NestedArchSpec(trunk, exit_head, extension, complex_head,
                                     n_classes=n_classes,
                                     activation=self.activation)

    def fit(self, X, y, X_val=None, y_val=None):
        """Run the federated simulation on (X, y).

        The periodic evaluations recorded in history_ use (X_val, y_val) when
        given and the training data otherwise. By default only the initial
        and final rounds are evaluated; pass eval_every for finer traces.
        """
        X, y = check_X_y(X, y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("need at least two classes")
        self.n_features_in_ = X.shape[1]

        arch = self._build_arch(X.shape[1], int(self.classes_.size))
        if self.predict_model not in ("simple", "complex"):
            raise ValueError("predict_model must be 'simple' or 'complex'")
        eval_every = self.eval_every
        if eval_every is None:
            eval_every = max(1, int(self.rounds))
        cfg = ExperimentConfig(
            method=self.method, rounds=int(self.rounds),
            participation_rate=self.participation_rate,
            n_devices=int(self.n_devices), n_simple=int(self.n_simple),
            arch=arch,
            client=ClientConfig(epochs=int(self.epochs), eta=self.eta,
                                batch_size=int(self.batch_size),
                                clip_norm=self.clip_norm,
                                side_coeff=self.side_coeff),
            split=self.split, alpha=self.alpha, seed=int(self.seed),
            report_mode=self.report_mode, eval_every=eval_every,
        )

        train = Dataset(X, y_idx, int(self.classes_.size))
        if X_val is not None:
            X_val, y_val = check_X_y(X_val, y_val)
            lookup = {label: i for i, label in enumerate(self.classes_)}
            try:
                y_val_idx = np.array([lookup[v] for v in y_val], dtype=np.int64)
            except KeyError as exc:
                raise ValueError(f"validation label {exc.args[0]!r} unseen in y") from None
            eval_ds = Dataset(X_val, y_val_idx, int(self.classes_.size))
        else:
            eval_ds = train

        state, records = run_simulation(cfg, train, eval_ds)
        self.arch_ = arch
        self.simple_weights_ = state.server_simple
        self.complex_weights_ = state.server_complex
        self.history_ = records
        return self

    def _logits(self, X) -> np.ndarray:
        check_is_fitted(self, "complex_weights_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        if self.predict_model == "simple":
            return nn.forward_logits(self.arch_.simple_spec, self.simple_weights_, X)
        return models.complex_forward(self.arch_, self.complex_weights_, X)

    def predict(self, X):
        logits = self._logits(X)
        return self.classes_[logits.argmax(axis=1)]

    def predict_proba(self, X):
        logits = self._logits(X)
        shifted = logits - logits.max(axis=1, keepdims=True)
        expz = np.exp(shifted)
        return expz / expz.sum(axis=1, keepdims=True)
