"""Estimator classes with the scikit-learn ``fit`` / ``predict`` interface.

``X`` is a batched :class:`~cebed.classical.PilotObservation` and ``y``
the true channels ``(N, n_r, n_f, n_s)``. ``predict`` returns complex
estimates of the same shape; ``score`` is the negative MSE so that larger
is better, as in scikit-learn's ``neg_mean_squared_error``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from cebed import classical
from cebed._validation import check_channels, check_layout, check_observations
from cebed.autodiff.checkpoint import from_bytes, to_bytes
from cebed.data import Dataset
from cebed.metrics import mse
from cebed.models import ModelSpec, build, estimate, input_adapter, to_planes
from cebed.training import TrainConfig, train


class ChannelEstimatorMixin:
    def score(self, X, y) -> float:
        return -mse(self.predict(X), y)

    def fit_dataset(self, dataset: Dataset, **fit_params):
        return self.fit(dataset.observations(), dataset.h_true, **fit_params)

    def predict_dataset(self, dataset: Dataset) -> np.ndarray:
        return self.predict(dataset.observations())


class LSEstimator(ChannelEstimatorMixin, BaseEstimator):
    """LS at the pilots plus linear interpolation; fitting only records the layout."""

    def fit(self, X, y=None):
        X = check_observations(X)
        self.pattern_ = X.pattern
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_observations(X)
        check_layout(X, self.pattern_)
        return classical.ls_estimate(X)


class LMMSEEstimator(ChannelEstimatorMixin, BaseEstimator):
    """Frequency-domain LMMSE at pilot symbols plus linear time interpolation.

    Correlations are estimated from the true training channels.
    """

    def fit(self, X, y):
        X = check_observations(X)
        y = check_channels(y, X)
        self.pattern_ = X.pattern
        self.n_r_ = X.n_r
        self.stats_ = classical.estimate_stats(y, X.pattern)
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_observations(X)
        check_layout(X, self.pattern_, self.n_r_)
        return classical.lmmse_2d(X, self.stats_)


class ALMMSEEstimator(LMMSEEstimator):
    """LMMSE restricted to the ``rank`` strongest correlation eigenpairs
    (``None``: a quarter of the pilot subcarriers)."""

    def __init__(self, rank=None):
        self.rank = rank

    def predict(self, X):
        check_is_fitted(self)
        X = check_observations(X)
        check_layout(X, self.pattern_, self.n_r_)
        return classical.almmse(X, self.stats_, self.rank)


class NeuralEstimator(ChannelEstimatorMixin, BaseEstimator):
    """One of the deep baselines trained with Adam, plateau LR decay and
    early stopping.

    Without ``eval_set`` the last ``validation_fraction`` of the (already
    shuffled) training data is held out for validation.
    """

    def __init__(
        self,
        model="ReEsNet",
        hyper=None,
        initial_lr=1e-3,
        batch_size=512,
        max_epochs=100,
        plateau_patience=3,
        early_stop_patience=10,
        min_lr=1e-5,
        validation_fraction=0.1,
        seed=0,
    ):
        self.model = model
        self.hyper = hyper
        self.initial_lr = initial_lr
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.plateau_patience = plateau_patience
        self.early_stop_patience = early_stop_patience
        self.min_lr = min_lr
        self.validation_fraction = validation_fraction
        self.seed = seed

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            initial_lr=self.initial_lr,
            batch_size=self.batch_size,
            plateau_patience=self.plateau_patience,
            early_stop_patience=self.early_stop_patience,
            min_lr=self.min_lr,
            max_epochs=self.max_epochs,
            seed=self.seed,
        )

    def _spec(self, X) -> ModelSpec:
        p = X.pattern
        return ModelSpec(self.model, X.n_r, p.n_fp, p.n_sp, p.dims.n_f, p.dims.n_s, dict(self.hyper or {}))

    def _arrays(self, X, y, spec):
        return input_adapter(X, spec.input_kind), to_planes(y).astype(np.float32)

    def fit(self, X, y, eval_set=None, on_epoch=None):
        X = check_observations(X)
        y = check_channels(y, X)
        spec = self._spec(X)
        if eval_set is None:
            n_val = max(1, int(round(self.validation_fraction * len(X))))
            if n_val >= len(X):
                raise ValueError("not enough samples to hold out a validation set")
            X_val, y_val = X[len(X) - n_val :], y[len(X) - n_val :]
            X, y = X[: len(X) - n_val], y[: len(X) - n_val]
        else:
            X_val, y_val = eval_set
            X_val = check_observations(X_val)
            y_val = check_channels(y_val, X_val)
        net = build(spec, self.seed)
        net, history = train(
            net, self._arrays(X, y, spec), self._arrays(X_val, y_val, spec), self.train_config(), on_epoch=on_epoch
        )
        self.spec_ = spec
        self.network_ = net
        self.history_ = history
        self.pattern_ = X.pattern
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_observations(X)
        check_layout(X, self.pattern_, self.spec_.n_r)
        return estimate(self.network_, X)

    def checkpoint(self) -> bytes:
        check_is_fitted(self)
        return to_bytes(self.network_.state_dict(), {"spec": self.spec_.to_dict()})

    @classmethod
    def from_checkpoint(cls, blob: bytes, pattern, **params) -> "NeuralEstimator":
        state, meta = from_bytes(blob)
        spec = ModelSpec.from_dict(meta["spec"])
        est = cls(model=spec.name, hyper=dict(spec.hyper) or None, **params)
        net = build(spec, 0)
        net.load_state_dict(state)
        est.spec_, est.network_, est.pattern_ = spec, net, pattern
        est.history_ = None
        return est


CLASSICAL = {"LS": LSEstimator, "LMMSE": LMMSEEstimator, "ALMMSE": ALMMSEEstimator}


def make_estimator(name: str, **params):
    """Estimator by method name (``LS``, ``LMMSE``, ``ALMMSE`` or a model name)."""
    key = str(name).upper()
    if key in CLASSICAL:
        return CLASSICAL[key](**params)
    ModelSpec(name)  # validates the name
    return NeuralEstimator(model=name, **params)
