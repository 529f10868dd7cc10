"""Input checks shared by the estimator classes."""

from __future__ import annotations

import numpy as np

from cebed.classical import PilotObservation


def check_observations(X) -> PilotObservation:
    if not isinstance(X, PilotObservation):
        raise TypeError(f"expected a PilotObservation, got {type(X).__name__}")
    if len(X.batch_shape) != 1:
        raise ValueError(f"expected a 1-D batch of observations, got batch shape {X.batch_shape}")
    return X


def check_channels(y, X: PilotObservation) -> np.ndarray:
    y = np.asarray(y)
    expected = (len(X), X.n_r) + X.dims.shape
    if y.shape != expected:
        raise ValueError(f"channels have shape {y.shape}, expected {expected}")
    if not np.all(np.isfinite(y)):
        raise ValueError("channels contain non-finite values")
    return y


def check_layout(X: PilotObservation, fitted_pattern, n_r: int | None = None) -> None:
    if not X.pattern.same_layout(fitted_pattern):
        raise ValueError("pilot layout differs from the one seen during fit")
    if n_r is not None and X.n_r != n_r:
        raise ValueError(f"observations have {X.n_r} antennas, estimator was fitted on {n_r}")
