"""Tapped-delay-line fading channels and the OFDM observation model."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from cebed.grid import ComplexGrid, GridDims, Profile, ScenarioSpec, rng_for

SPEED_OF_LIGHT = 299_792_458.0
CARRIER_HZ = 2.1e9
SCS_HZ = 30e3
N_TAPS = 8
N_SINUSOIDS = 32
DEFAULT_SPATIAL_COEFF = 0.9
RMS_DELAY_SPREAD = {Profile.UMI_LIKE: 100e-9, Profile.UMA_LIKE: 300e-9}


@dataclass(frozen=True)
class ChannelProfile:
    name: Profile
    tap_delays: tuple
    tap_powers: tuple
    carrier_hz: float = CARRIER_HZ
    scs_hz: float = SCS_HZ

    def __post_init__(self):
        object.__setattr__(self, "name", Profile.parse(self.name))
        delays = np.asarray(self.tap_delays, dtype=float)
        powers = np.asarray(self.tap_powers, dtype=float)
        if delays.size == 0:
            raise ValueError("tap list is empty")
        if delays.shape != powers.shape:
            raise ValueError("tap_delays and tap_powers differ in length")
        if np.any(delays < 0) or np.any(np.diff(delays) <= 0):
            raise ValueError("tap delays must be non-negative and strictly increasing")
        if np.any(powers <= 0):
            raise ValueError("tap powers must be positive")
        if abs(powers.sum() - 1.0) > 1e-12:
            raise ValueError(f"tap powers sum to {powers.sum()!r}, expected 1")
        object.__setattr__(self, "tap_delays", tuple(float(d) for d in delays))
        object.__setattr__(self, "tap_powers", tuple(float(p) for p in powers))

    @property
    def rms_delay_spread(self) -> float:
        d = np.asarray(self.tap_delays)
        p = np.asarray(self.tap_powers)
        mean = p @ d
        return float(np.sqrt(p @ (d - mean) ** 2))

    @property
    def symbol_duration(self) -> float:
        # 14 symbols per slot, slot length 1 ms * 15 kHz / scs
        return 1e-3 * 15e3 / self.scs_hz / 14


def exponential_pdp(rms_delay: float, n_taps: int = N_TAPS) -> tuple[np.ndarray, np.ndarray]:
    """Equally spaced taps over ``[0, 3.5 * rms_delay]`` with exponential decay
    tuned so the RMS delay spread equals ``rms_delay``."""
    delays = np.linspace(0.0, 3.5 * rms_delay, n_taps)

    def rms_error(log_decay):
        w = np.exp(-delays / (np.exp(log_decay) * rms_delay))
        w /= w.sum()
        mean = w @ delays
        return np.sqrt(w @ (delays - mean) ** 2) - rms_delay

    log_decay = brentq(rms_error, np.log(1e-3), np.log(1e3), xtol=1e-14)
    powers = np.exp(-delays / (np.exp(log_decay) * rms_delay))
    powers /= powers.sum()
    return delays, powers


@lru_cache(maxsize=None)
def get_profile(name) -> ChannelProfile:
    """Preset surrogate profile by name (``"umi-like"`` / ``"uma-like"``)."""
    name = Profile.parse(name)
    delays, powers = exponential_pdp(RMS_DELAY_SPREAD[name])
    return ChannelProfile(name, tuple(delays), tuple(powers))


@dataclass(frozen=True)
class NoiseSpec:
    sigma2: float

    def __post_init__(self):
        if not (self.sigma2 >= 0):
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")


def noise_sigma2(snr_db: float) -> NoiseSpec:
    return NoiseSpec(10.0 ** (-float(snr_db) / 10.0))


def spatial_covariance(n_r: int, coeff: float = DEFAULT_SPATIAL_COEFF) -> np.ndarray:
    """Exponential correlation model ``R[i, j] = coeff ** |i - j|``."""
    if n_r < 1:
        raise ValueError("n_r must be >= 1")
    if not (0.0 <= coeff < 1.0):
        raise ValueError(f"coeff must lie in [0, 1), got {coeff}")
    idx = np.arange(n_r)
    return coeff ** np.abs(idx[:, None] - idx[None, :]).astype(float)


@lru_cache(maxsize=64)
def _covariance_sqrt(n_r: int, coeff: float) -> np.ndarray:
    w, v = np.linalg.eigh(spatial_covariance(n_r, coeff))
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    root.setflags(write=False)
    return root


def normalize_energy(h: np.ndarray) -> np.ndarray:
    """Scale ``h`` so the mean of ``|h|**2`` over all entries is 1."""
    energy = np.mean(np.abs(h) ** 2)
    if energy <= 0:
        raise ValueError("cannot normalise an all-zero channel")
    return h / np.sqrt(energy)


def raw_channel(
    profile: ChannelProfile,
    n_r: int,
    dims: GridDims,
    speed_mps: float,
    rng: np.random.Generator,
    spatial_coeff: float = DEFAULT_SPATIAL_COEFF,
) -> np.ndarray:
    """Unnormalised frequency response of shape ``(n_r, n_f, n_s)``."""
    delays = np.asarray(profile.tap_delays)
    powers = np.asarray(profile.tap_powers)
    n_taps = delays.size
    f_d = speed_mps * profile.carrier_hz / SPEED_OF_LIGHT
    t = np.arange(dims.n_s) * profile.symbol_duration

    # sum-of-sinusoids per (antenna, tap)
    aoa = rng.uniform(0.0, 2 * np.pi, size=(n_r, n_taps, N_SINUSOIDS))
    phase = rng.uniform(0.0, 2 * np.pi, size=(n_r, n_taps, N_SINUSOIDS))
    doppler = f_d * np.cos(aoa)
    arg = 2 * np.pi * doppler[..., None] * t + phase[..., None]
    gains = np.exp(1j * arg).sum(axis=2) / np.sqrt(N_SINUSOIDS)
    gains *= np.sqrt(powers)[None, :, None]

    f_k = np.arange(dims.n_f) * profile.scs_hz
    steering = np.exp(-2j * np.pi * np.outer(f_k, delays))
    h = np.einsum("kl,rls->rks", steering, gains)
    if n_r > 1:
        h = np.einsum("ij,jks->iks", _covariance_sqrt(n_r, float(spatial_coeff)), h)
    return h


def sample_channel(
    scenario: ScenarioSpec,
    profile: ChannelProfile,
    seed: int,
    dims: GridDims = GridDims(),
    spatial_coeff: float = DEFAULT_SPATIAL_COEFF,
) -> ComplexGrid:
    if profile.name != scenario.profile:
        raise ValueError(f"profile {profile.name.value} does not match scenario {scenario.profile.value}")
    h = raw_channel(profile, scenario.n_r, dims, scenario.speed_mps, rng_for(seed), spatial_coeff)
    return ComplexGrid(dims, scenario.n_r, normalize_energy(h))


def transmit(H: ComplexGrid, X: ComplexGrid, noise: NoiseSpec, seed: int) -> ComplexGrid:
    """Per-antenna ``Y_r = H_r * X + W_r`` with circular complex Gaussian noise."""
    if X.antennas != 1:
        raise ValueError("transmitted grid must have a single antenna")
    if X.dims != H.dims:
        raise ValueError(f"dimension mismatch: H {H.dims} vs X {X.dims}")
    y = H.data * X.data
    if noise.sigma2 > 0:
        y = y + awgn(rng_for(seed), y.shape, noise.sigma2)
    return ComplexGrid(H.dims, H.antennas, y)


def awgn(rng: np.random.Generator, shape, sigma2: float) -> np.ndarray:
    scale = np.sqrt(sigma2 / 2.0)
    w = rng.standard_normal(tuple(shape) + (2,)) * scale
    return w[..., 0] + 1j * w[..., 1]
