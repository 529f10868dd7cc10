"""LS, 2D LMMSE and ALMMSE channel estimation.

All estimators accept batched inputs: any number of leading dimensions
before ``(n_r, n_fp, n_sp)`` in the received pilots is carried through.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from cebed.grid import ComplexGrid, GridDims
from cebed.pilots import PilotPattern, extract_array

RIDGE = 1e-10


@dataclass(frozen=True, eq=False)
class PilotObservation:
    """Received pilots ``y_p`` (``[..., n_r, n_fp, n_sp]``), transmitted
    pilots ``x_p`` (``[..., n_fp, n_sp]``) and the noise variance."""

    y_p: np.ndarray
    x_p: np.ndarray
    pattern: PilotPattern
    sigma2: "float | np.ndarray"

    def __post_init__(self):
        y_p = np.asarray(self.y_p)
        x_p = np.asarray(self.x_p)
        counts = (self.pattern.n_fp, self.pattern.n_sp)
        if y_p.ndim < 3 or y_p.shape[-2:] != counts:
            raise ValueError(f"y_p shape {y_p.shape} inconsistent with pilot counts {counts}")
        if x_p.shape[-2:] != counts:
            raise ValueError(f"x_p shape {x_p.shape} inconsistent with pilot counts {counts}")
        if x_p.shape[:-2] != y_p.shape[:-3]:
            raise ValueError(f"batch shapes differ: y_p {y_p.shape[:-3]} vs x_p {x_p.shape[:-2]}")
        sigma2 = np.asarray(self.sigma2, dtype=float)
        if np.any(sigma2 < 0) or not np.all(np.isfinite(sigma2)):
            raise ValueError("sigma2 must be finite and >= 0")
        if sigma2.ndim and sigma2.shape != y_p.shape[:-3]:
            raise ValueError(f"sigma2 shape {sigma2.shape} does not match batch {y_p.shape[:-3]}")
        object.__setattr__(self, "y_p", y_p)
        object.__setattr__(self, "x_p", x_p)
        object.__setattr__(self, "sigma2", sigma2 if sigma2.ndim else float(sigma2))

    @classmethod
    def from_grid(cls, Y: ComplexGrid, pattern: PilotPattern, sigma2: float) -> "PilotObservation":
        return cls(extract_array(Y.data, pattern), pattern.values, pattern, sigma2)

    @property
    def batch_shape(self) -> tuple:
        return self.y_p.shape[:-3]

    @property
    def n_r(self) -> int:
        return self.y_p.shape[-3]

    @property
    def dims(self) -> GridDims:
        return self.pattern.dims

    def __len__(self):
        if not self.batch_shape:
            raise TypeError("unbatched observation has no length")
        return self.batch_shape[0]

    def __getitem__(self, idx) -> "PilotObservation":
        if not self.batch_shape:
            raise TypeError("unbatched observation cannot be indexed")
        sigma2 = self.sigma2[idx] if np.ndim(self.sigma2) else self.sigma2
        return PilotObservation(self.y_p[idx], self.x_p[idx], self.pattern, sigma2)


@dataclass(frozen=True, eq=False)
class ChannelStats:
    """Second-order statistics feeding the frequency-domain LMMSE filter.

    ``r_cross[i]`` is ``E[h_i h_p^i^H]`` (``n_f x n_fp``) for pilot symbol
    ``i``; ``r_auto`` is ``E[h_p h_p^H]`` pooled over pilot symbols.
    """

    r_cross: np.ndarray
    r_auto: np.ndarray
    sample_count: int

    def __post_init__(self):
        r_auto = np.asarray(self.r_auto, dtype=np.complex128)
        r_cross = np.asarray(self.r_cross, dtype=np.complex128)
        n_fp = r_auto.shape[0]
        if r_auto.shape != (n_fp, n_fp):
            raise ValueError(f"r_auto must be square, got {r_auto.shape}")
        if r_cross.ndim != 3 or r_cross.shape[2] != n_fp:
            raise ValueError(f"r_cross must be (n_sp, n_f, n_fp), got {r_cross.shape}")
        r_auto = 0.5 * (r_auto + r_auto.conj().T)
        object.__setattr__(self, "r_auto", r_auto)
        object.__setattr__(self, "r_cross", r_cross)

    @property
    def n_fp(self) -> int:
        return self.r_auto.shape[0]

    @property
    def ridge(self) -> float:
        return RIDGE * float(np.real(np.trace(self.r_auto))) / self.n_fp

    def loading(self, sigma2: float) -> float:
        """Diagonal loading: ``sigma2``, plus the ridge once noise is negligible."""
        return sigma2 if sigma2 > self.ridge else sigma2 + self.ridge

    @classmethod
    def from_covariance(cls, cov: np.ndarray, pattern: PilotPattern) -> "ChannelStats":
        """Stats from a known frequency covariance ``cov`` (``n_f x n_f``),
        identical for every pilot symbol."""
        cov = np.asarray(cov, dtype=np.complex128)
        f = list(pattern.subcarrier_positions)
        r_cross = np.repeat(cov[:, f][None], pattern.n_sp, axis=0)
        return cls(r_cross, cov[np.ix_(f, f)], sample_count=0)


def _as_channel_array(channels) -> np.ndarray:
    if isinstance(channels, np.ndarray):
        arr = channels
    else:
        arr = np.stack([c.data if isinstance(c, ComplexGrid) else np.asarray(c) for c in channels])
    if arr.ndim == 3:
        arr = arr[:, None]
    if arr.ndim != 4:
        raise ValueError(f"expected channels shaped (N, n_r, n_f, n_s), got {arr.shape}")
    return arr


def ls_pilot(obs: PilotObservation) -> np.ndarray:
    """Elementwise ``y_p / x_p`` per antenna."""
    x_p = obs.x_p
    if np.any(x_p == 0):
        raise ValueError("zero pilot value; LS estimate undefined")
    return obs.y_p / x_p[..., None, :, :]


def interpolation_matrix(positions, size: int) -> np.ndarray:
    """``size x len(positions)`` linear interpolation weights with
    nearest-value extrapolation outside the pilot span."""
    positions = np.asarray(positions, dtype=float)
    eye = np.eye(positions.size)
    grid = np.arange(size, dtype=float)
    return np.stack([np.interp(grid, positions, eye[:, j]) for j in range(positions.size)], axis=1)


def time_interpolate(h_sym: np.ndarray, pattern: PilotPattern) -> np.ndarray:
    """``[..., n_f, n_sp]`` estimates at pilot symbols -> ``[..., n_f, n_s]``."""
    w_t = interpolation_matrix(pattern.symbol_positions, pattern.dims.n_s)
    return h_sym @ w_t.T


def interpolate_linear(h_p: np.ndarray, pattern: PilotPattern, dims: GridDims | None = None) -> np.ndarray:
    dims = dims or pattern.dims
    if dims != pattern.dims:
        raise ValueError(f"dims {dims} differ from pattern dims {pattern.dims}")
    h_p = np.asarray(h_p)
    if h_p.shape[-2:] != (pattern.n_fp, pattern.n_sp):
        raise ValueError(f"pilot estimate shape {h_p.shape} does not match pattern")
    w_f = interpolation_matrix(pattern.subcarrier_positions, dims.n_f)
    return time_interpolate(w_f @ h_p, pattern)


def ls_estimate(obs: PilotObservation) -> np.ndarray:
    """LS at pilots followed by linear interpolation over the full grid."""
    return interpolate_linear(ls_pilot(obs), obs.pattern)


def estimate_stats(channels, pattern: PilotPattern) -> ChannelStats:
    """Sample correlations from true channels; antennas count as samples."""
    h = _as_channel_array(channels)
    if h.shape[-2:] != pattern.dims.shape:
        raise ValueError(f"channel grid {h.shape[-2:]} does not match pattern {pattern.dims.shape}")
    h = h.reshape(-1, *pattern.dims.shape).astype(np.complex128, copy=False)
    count = h.shape[0]
    if count < pattern.n_fp:
        raise ValueError(f"need at least n_fp={pattern.n_fp} channel samples, got {count}")
    f = list(pattern.subcarrier_positions)
    r_cross = []
    r_auto = np.zeros((pattern.n_fp, pattern.n_fp), dtype=np.complex128)
    for s in pattern.symbol_positions:
        h_i = h[:, :, s]
        h_p = h_i[:, f]
        r_cross.append(h_i.T @ h_p.conj() / count)
        r_auto += h_p.T @ h_p.conj() / count
    return ChannelStats(np.stack(r_cross), r_auto / pattern.n_sp, count)


def _check_stats(obs: PilotObservation, stats: ChannelStats):
    if stats.n_fp != obs.pattern.n_fp or stats.r_cross.shape[0] != obs.pattern.n_sp:
        raise ValueError("channel stats do not match the pilot pattern")
    if stats.r_cross.shape[1] != obs.pattern.dims.n_f:
        raise ValueError("channel stats do not match the grid size")


def lmmse_filters(stats: ChannelStats, sigma2: float) -> np.ndarray:
    """``F_i = R_cross[i] (R_auto + sigma2 I)^-1`` for every pilot symbol,
    stacked as ``(n_sp, n_f, n_fp)``."""
    a = stats.r_auto + stats.loading(sigma2) * np.eye(stats.n_fp)
    try:
        factor = linalg.cho_factor(a, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise ValueError("auto-correlation is singular beyond the ridge tolerance") from exc
    # F^H = A^-1 R_cross^H since A is Hermitian
    return np.stack([linalg.cho_solve(factor, rc.conj().T).conj().T for rc in stats.r_cross])


def almmse_filters(stats: ChannelStats, sigma2: float, rank: int) -> np.ndarray:
    """Rank-truncated filters: keep the ``rank`` strongest eigenpairs of the
    pilot auto-correlation and invert only inside that subspace."""
    if not 1 <= rank <= stats.n_fp:
        raise ValueError(f"rank must lie in [1, {stats.n_fp}], got {rank}")
    w, u = np.linalg.eigh(stats.r_auto)
    w, u = np.clip(w[::-1][:rank], 0.0, None), u[:, ::-1][:, :rank]
    core = (u / (w + stats.loading(sigma2))) @ u.conj().T
    return np.stack([rc @ core for rc in stats.r_cross])


def _apply_filters(h_ls: np.ndarray, sigma2, make_filters) -> np.ndarray:
    """Apply per-sigma2 filters to ``h_ls[..., n_r, n_fp, n_sp]``."""
    sig = np.asarray(sigma2, dtype=float)
    batch = h_ls.shape[:-3]
    if sig.ndim == 0:
        filt = make_filters(float(sig))
        return np.einsum("ikf,...fi->...ki", filt, h_ls)
    out = None
    flat_ls = h_ls.reshape((-1,) + h_ls.shape[-3:])
    flat_sig = np.broadcast_to(sig, batch).reshape(-1)
    for value in np.unique(flat_sig):
        idx = np.nonzero(flat_sig == value)[0]
        part = np.einsum("ikf,...fi->...ki", make_filters(float(value)), flat_ls[idx])
        if out is None:
            out = np.zeros(flat_ls.shape[:-2] + (part.shape[-2], flat_ls.shape[-1]), dtype=part.dtype)
        out[idx] = part
    return out.reshape(batch + out.shape[1:])


def lmmse_fd(obs: PilotObservation, stats: ChannelStats) -> np.ndarray:
    """Frequency-domain LMMSE at pilot symbols: ``[..., n_r, n_f, n_sp]``."""
    _check_stats(obs, stats)
    return _apply_filters(ls_pilot(obs), obs.sigma2, lambda s2: lmmse_filters(stats, s2))


def lmmse_2d(obs: PilotObservation, stats: ChannelStats) -> np.ndarray:
    return time_interpolate(lmmse_fd(obs, stats), obs.pattern)


def almmse(obs: PilotObservation, stats: ChannelStats, rank: int | None = None) -> np.ndarray:
    _check_stats(obs, stats)
    rank = default_rank(stats.n_fp) if rank is None else int(rank)
    if not 1 <= rank <= stats.n_fp:
        raise ValueError(f"rank must lie in [1, {stats.n_fp}], got {rank}")
    h = _apply_filters(ls_pilot(obs), obs.sigma2, lambda s2: almmse_filters(stats, s2, rank))
    return time_interpolate(h, obs.pattern)


def default_rank(n_fp: int) -> int:
    return max(1, n_fp // 4)
