"""Resource-grid types, scenario descriptions, seed derivation and QPSK sources."""

from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

MASK64 = (1 << 64) - 1

VALID_NR = (1, 4, 8, 16)
VALID_NFP = (36, 72)
VALID_NSP = (1, 2)


class Profile(str, enum.Enum):
    UMI_LIKE = "umi-like"
    UMA_LIKE = "uma-like"

    @classmethod
    def parse(cls, value: "str | Profile") -> "Profile":
        if isinstance(value, Profile):
            return value
        key = str(value).lower().replace("_", "-")
        aliases = {"umi": "umi-like", "uma": "uma-like", "umilike": "umi-like", "umalike": "uma-like"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown channel profile {value!r}") from None


@dataclass(frozen=True)
class GridDims:
    n_f: int = 72
    n_s: int = 14

    def __post_init__(self):
        if int(self.n_f) < 1 or int(self.n_s) < 1:
            raise ValueError(f"grid dims must be positive, got {self.n_f}x{self.n_s}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_f, self.n_s)


@dataclass(frozen=True, eq=False)
class ComplexGrid:
    """Complex values over (antenna, subcarrier, symbol).

    ``data`` is stored as a read-only complex128 array of shape
    ``(antennas, n_f, n_s)``.
    """

    dims: GridDims
    antennas: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.antennas < 1:
            raise ValueError("antennas must be >= 1")
        arr = np.asarray(self.data)
        expected = self.antennas * self.dims.n_f * self.dims.n_s
        if arr.size != expected:
            raise ValueError(f"data has {arr.size} entries, expected {expected}")
        arr = np.array(arr, dtype=np.complex128).reshape(self.antennas, self.dims.n_f, self.dims.n_s)
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, arr) -> "ComplexGrid":
        arr = np.asarray(arr)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3:
            raise ValueError(f"expected (antennas, n_f, n_s) array, got shape {arr.shape}")
        return cls(GridDims(arr.shape[1], arr.shape[2]), arr.shape[0], arr)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, ComplexGrid):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.data, other.data)

    __hash__ = None


@dataclass(frozen=True)
class ScenarioSpec:
    """One wireless environment: (profile, N_r, N_fp, N_sp, SNR, speed)."""

    profile: Profile = Profile.UMI_LIKE
    n_r: int = 1
    n_fp: int = 72
    n_sp: int = 2
    snr_db: float = 10.0
    speed_mps: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "profile", Profile.parse(self.profile))
        if self.n_r not in VALID_NR:
            raise ValueError(f"n_r must be one of {VALID_NR}, got {self.n_r}")
        if self.n_fp not in VALID_NFP:
            raise ValueError(f"n_fp must be one of {VALID_NFP}, got {self.n_fp}")
        if self.n_sp not in VALID_NSP:
            raise ValueError(f"n_sp must be one of {VALID_NSP}, got {self.n_sp}")
        if not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if not (self.speed_mps >= 0):
            raise ValueError(f"speed_mps must be >= 0, got {self.speed_mps}")


@dataclass(frozen=True)
class SeedSpec:
    master: int
    stream_label: str
    index: int = 0

    def derive(self) -> int:
        return derive_seed(self.master, self.stream_label, self.index)


def derive_seed(master: int, stream_label: str, index: int = 0) -> int:
    """Mix ``(master, stream_label, index)`` into a 64-bit seed.

    Uses BLAKE2b with an 8-byte digest, so the result is platform
    independent and collisions between streams are negligible.
    """
    label = stream_label.encode("utf-8")
    payload = struct.pack("<QQI", int(master) & MASK64, int(index) & MASK64, len(label)) + label
    digest = hashlib.blake2b(payload, digest_size=8, person=b"cebed-seed").digest()
    return int.from_bytes(digest, "little")


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))


_QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0)


def qpsk_symbols(rng: np.random.Generator, shape) -> np.ndarray:
    # Gray labelling: first bit -> real sign, second bit -> imaginary sign
    bits = rng.integers(0, 2, size=tuple(shape) + (2,), dtype=np.int8)
    return _QPSK[2 * bits[..., 0] + bits[..., 1]]


def qpsk_grid(seed: int, dims: GridDims) -> ComplexGrid:
    symbols = qpsk_symbols(rng_for(seed), dims.shape)
    return ComplexGrid(dims, 1, symbols[None])
