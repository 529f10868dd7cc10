"""Block pilot patterns and the conversions between grids and pilot matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cebed.grid import ComplexGrid, GridDims, qpsk_symbols, rng_for

PILOT_SYMBOLS = {2: (3, 10), 1: (3,)}


@dataclass(frozen=True, eq=False)
class PilotPattern:
    """Boolean pilot mask over (subcarrier, symbol) plus the pilot values.

    ``values`` has shape ``(n_fp, n_sp)`` and is ordered like
    ``subcarrier_positions`` x ``symbol_positions``.
    """

    dims: GridDims
    subcarrier_positions: tuple
    symbol_positions: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        f = np.asarray(self.subcarrier_positions, dtype=int)
        s = np.asarray(self.symbol_positions, dtype=int)
        if f.size == 0 or s.size == 0:
            raise ValueError("pilot pattern needs at least one subcarrier and symbol")
        if np.any(np.diff(f) <= 0) or np.any(np.diff(s) <= 0):
            raise ValueError("pilot positions must be strictly increasing")
        if f[0] < 0 or f[-1] >= self.dims.n_f or s[0] < 0 or s[-1] >= self.dims.n_s:
            raise ValueError("pilot positions fall outside the grid")
        values = np.array(self.values, dtype=np.complex128)
        if values.shape != (f.size, s.size):
            raise ValueError(f"pilot values have shape {values.shape}, expected {(f.size, s.size)}")
        if not np.allclose(np.abs(values), 1.0, atol=1e-12):
            raise ValueError("pilot values must be unit modulus")
        values.setflags(write=False)
        object.__setattr__(self, "subcarrier_positions", tuple(int(i) for i in f))
        object.__setattr__(self, "symbol_positions", tuple(int(i) for i in s))
        object.__setattr__(self, "values", values)

    @property
    def n_fp(self) -> int:
        return len(self.subcarrier_positions)

    @property
    def n_sp(self) -> int:
        return len(self.symbol_positions)

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.dims.shape, dtype=bool)
        m[np.ix_(self.subcarrier_positions, self.symbol_positions)] = True
        return m

    def with_values(self, values) -> "PilotPattern":
        return PilotPattern(self.dims, self.subcarrier_positions, self.symbol_positions, values)

    def same_layout(self, other: "PilotPattern") -> bool:
        return (
            self.dims == other.dims
            and self.subcarrier_positions == other.subcarrier_positions
            and self.symbol_positions == other.symbol_positions
        )

    def __eq__(self, other):
        if not isinstance(other, PilotPattern):
            return NotImplemented
        return self.same_layout(other) and np.array_equal(self.values, other.values)

    __hash__ = None


def block_layout(dims: GridDims, n_fp: int, n_sp: int) -> tuple[tuple, tuple]:
    if n_sp not in PILOT_SYMBOLS:
        raise ValueError(f"unsupported number of pilot symbols: {n_sp}")
    if n_fp < 1 or dims.n_f % n_fp:
        raise ValueError(f"n_fp={n_fp} does not divide n_f={dims.n_f}")
    symbols = PILOT_SYMBOLS[n_sp]
    if symbols[-1] >= dims.n_s:
        raise ValueError(f"pilot symbols {symbols} do not fit in {dims.n_s} symbols")
    stride = dims.n_f // n_fp
    return tuple(range(0, dims.n_f, stride)), symbols


def block_pattern(dims: GridDims, n_fp: int, n_sp: int, seed: int) -> PilotPattern:
    f, s = block_layout(dims, n_fp, n_sp)
    values = qpsk_symbols(rng_for(seed), (len(f), len(s)))
    return PilotPattern(dims, f, s, values)


def extract_array(grid: np.ndarray, pattern: PilotPattern) -> np.ndarray:
    """Pilot cells of ``grid[..., n_f, n_s]`` as ``[..., n_fp, n_sp]``."""
    grid = np.asarray(grid)
    if grid.shape[-2:] != pattern.dims.shape:
        raise ValueError(f"grid shape {grid.shape[-2:]} does not match pattern {pattern.dims.shape}")
    return grid[..., pattern.subcarrier_positions, :][..., pattern.symbol_positions]


def embed_array(values: np.ndarray, pattern: PilotPattern) -> np.ndarray:
    values = np.asarray(values)
    if values.shape[-2:] != (pattern.n_fp, pattern.n_sp):
        raise ValueError(f"values shape {values.shape[-2:]} does not match pattern counts {(pattern.n_fp, pattern.n_sp)}")
    out = np.zeros(values.shape[:-2] + pattern.dims.shape, dtype=np.result_type(values.dtype, np.complex64))
    out[..., np.asarray(pattern.subcarrier_positions)[:, None], np.asarray(pattern.symbol_positions)[None, :]] = values
    return out


def extract(grid: ComplexGrid, pattern: PilotPattern) -> np.ndarray:
    if grid.dims != pattern.dims:
        raise ValueError(f"dimension mismatch: grid {grid.dims} vs pattern {pattern.dims}")
    return extract_array(grid.data, pattern)


def embed_masked(values, pattern: PilotPattern) -> ComplexGrid:
    values = np.asarray(values)
    if values.ndim == 2:
        values = values[None]
    if values.ndim != 3:
        raise ValueError(f"expected (n_r, n_fp, n_sp) pilot matrix, got shape {values.shape}")
    return ComplexGrid(pattern.dims, values.shape[0], embed_array(values, pattern))
