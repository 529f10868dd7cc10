"""Accuracy metrics and confidence intervals."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats


def mse(est, truth) -> float:
    """Mean of ``|est - truth|**2`` over every antenna, subcarrier and symbol."""
    est = getattr(est, "data", est)
    truth = getattr(truth, "data", truth)
    est = np.asarray(est)
    truth = np.asarray(truth)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    diff = est.astype(np.complex128) - truth.astype(np.complex128)
    return float(np.mean(diff.real**2 + diff.imag**2))


def per_sample_mse(est: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """MSE of each leading-axis sample of ``[N, ...]`` arrays."""
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    diff = est.astype(np.complex128) - truth.astype(np.complex128)
    return np.mean((diff.real**2 + diff.imag**2).reshape(len(diff), -1), axis=1)


def gain_db(mse_ls: float, mse_method: float) -> float:
    if mse_ls <= 0 or mse_method <= 0:
        raise ValueError("gain_db needs strictly positive MSE values")
    return 10.0 * math.log10(mse_ls / mse_method)


def normalized_score(mse_nn: float, mse_ls: float, mse_lmmse: float) -> float:
    """``100 * max(0, (nn - ls) / (lmmse - ls))``; above 100 means better than LMMSE."""
    denom = mse_lmmse - mse_ls
    if denom == 0:
        raise ValueError("normalized score undefined when LMMSE and LS MSE coincide")
    return 100.0 * max(0.0, (mse_nn - mse_ls) / denom)


def ci95(values) -> tuple[float, float]:
    """Mean and Student-t 95% half-width."""
    v = np.asarray(list(values), dtype=float)
    if v.size < 2:
        raise ValueError("ci95 needs at least two values")
    mean = float(v.mean())
    sd = float(v.std(ddof=1))
    return mean, float(stats.t.ppf(0.975, v.size - 1) * sd / math.sqrt(v.size))
