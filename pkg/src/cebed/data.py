"""Multi-domain dataset generation, splitting and on-disk persistence."""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from cebed.channel import DEFAULT_SPATIAL_COEFF, get_profile, noise_sigma2, sample_channel, transmit
from cebed.classical import PilotObservation
from cebed.grid import ComplexGrid, GridDims, Profile, ScenarioSpec, derive_seed, qpsk_grid, rng_for
from cebed.pilots import PilotPattern, block_layout, block_pattern, extract_array

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
SPLIT_NAMES = ("train", "val", "test")
DEFAULT_SNRS = (0.0, 5.0, 10.0, 15.0, 20.0)
DEFAULT_SPEEDS = (0.0, 5.0, 10.0, 15.0)


class ChecksumError(IOError):
    pass


class FormatVersionError(IOError):
    pass


@dataclass(frozen=True)
class ScenarioFamily:
    """Fixed profile / antennas / pilot layout with a set of SNR and speed domains."""

    profile: Profile = Profile.UMI_LIKE
    n_r: int = 1
    n_fp: int = 72
    n_sp: int = 2
    snr_domains: tuple = DEFAULT_SNRS
    speed_domains: tuple = DEFAULT_SPEEDS
    n_f: int = 72
    n_s: int = 14
    spatial_coeff: float = DEFAULT_SPATIAL_COEFF

    def __post_init__(self):
        object.__setattr__(self, "profile", Profile.parse(self.profile))
        object.__setattr__(self, "snr_domains", tuple(float(v) for v in self.snr_domains))
        object.__setattr__(self, "speed_domains", tuple(float(v) for v in self.speed_domains))
        if not self.snr_domains or not self.speed_domains:
            raise ValueError("SNR and speed domain sets must be non-empty")
        # validates n_r / n_fp / n_sp / speeds
        for speed in self.speed_domains:
            self.scenario(self.snr_domains[0], speed)
        block_layout(self.dims, self.n_fp, self.n_sp)

    @property
    def dims(self) -> GridDims:
        return GridDims(self.n_f, self.n_s)

    def domain_pairs(self) -> list[tuple[float, float]]:
        return list(itertools.product(self.snr_domains, self.speed_domains))

    def scenario(self, snr_db: float, speed_mps: float) -> ScenarioSpec:
        return ScenarioSpec(self.profile, self.n_r, self.n_fp, self.n_sp, snr_db, speed_mps)

    def layout(self) -> PilotPattern:
        f, s = block_layout(self.dims, self.n_fp, self.n_sp)
        return PilotPattern(self.dims, f, s, np.ones((len(f), len(s))))

    def replace(self, **changes) -> "ScenarioFamily":
        fields = self.to_dict()
        fields.update(changes)
        return ScenarioFamily.from_dict(fields)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["profile"] = self.profile.value
        d["snr_domains"] = list(self.snr_domains)
        d["speed_domains"] = list(self.speed_domains)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioFamily":
        return cls(**d)

    def label(self) -> str:
        return f"{self.profile.value}/nr{self.n_r}/fp{self.n_fp}/sp{self.n_sp}"


@dataclass(frozen=True)
class Sample:
    h_true: np.ndarray
    y_p: np.ndarray
    x_p: np.ndarray
    snr_db: float
    speed_mps: float
    sample_seed: int


def generate_sample(family: ScenarioFamily, snr_db: float, speed_mps: float, sample_seed: int) -> Sample:
    """One ``(X, H)`` draw; every random stream is derived from ``sample_seed``."""
    dims = family.dims
    scenario = family.scenario(snr_db, speed_mps)
    h = sample_channel(
        scenario,
        get_profile(family.profile),
        derive_seed(sample_seed, "channel"),
        dims=dims,
        spatial_coeff=family.spatial_coeff,
    )
    pattern = block_pattern(dims, family.n_fp, family.n_sp, derive_seed(sample_seed, "pilots"))
    x = qpsk_grid(derive_seed(sample_seed, "data"), dims).data.copy()
    x[0][pattern.mask] = pattern.values.reshape(-1)
    y = transmit(h, ComplexGrid(dims, 1, x), noise_sigma2(snr_db), derive_seed(sample_seed, "noise"))
    return Sample(
        h_true=h.data.astype(np.complex64),
        y_p=extract_array(y.data, pattern).astype(np.complex64),
        x_p=pattern.values.astype(np.complex64),
        snr_db=float(snr_db),
        speed_mps=float(speed_mps),
        sample_seed=int(sample_seed),
    )


@dataclass(eq=False)
class Dataset:
    family: ScenarioFamily
    h_true: np.ndarray  # (N, n_r, n_f, n_s) complex64
    y_p: np.ndarray  # (N, n_r, n_fp, n_sp) complex64
    x_p: np.ndarray  # (N, n_fp, n_sp) complex64
    snr_db: np.ndarray  # (N,) float32
    speed_mps: np.ndarray  # (N,) float32
    sample_seeds: np.ndarray  # (N,) uint64
    master_seed: int = 0
    split: np.ndarray = field(default=None)  # (N,) int8, -1 = unassigned

    def __post_init__(self):
        n = len(self.h_true)
        if self.split is None:
            self.split = np.full(n, -1, dtype=np.int8)
        for name in ("y_p", "x_p", "snr_db", "speed_mps", "sample_seeds", "split"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"field {name} has {len(getattr(self, name))} entries, expected {n}")

    def __len__(self):
        return len(self.h_true)

    @property
    def pattern(self) -> PilotPattern:
        return self.family.layout()

    def sigma2(self) -> np.ndarray:
        return 10.0 ** (-self.snr_db.astype(np.float64) / 10.0)

    def observations(self) -> PilotObservation:
        return PilotObservation(
            self.y_p.astype(np.complex128), self.x_p.astype(np.complex128), self.pattern, self.sigma2()
        )

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.family,
            self.h_true[idx],
            self.y_p[idx],
            self.x_p[idx],
            self.snr_db[idx],
            self.speed_mps[idx],
            self.sample_seeds[idx],
            self.master_seed,
            self.split[idx],
        )

    def split_indices(self, name: str) -> np.ndarray:
        code = SPLIT_NAMES.index(name)
        return np.nonzero(self.split == code)[0]

    def get_split(self, name: str) -> "Dataset":
        return self.subset(self.split_indices(name))

    def sample(self, i: int) -> Sample:
        return Sample(
            self.h_true[i], self.y_p[i], self.x_p[i], float(self.snr_db[i]), float(self.speed_mps[i]), int(self.sample_seeds[i])
        )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in self._blobs().values():
            h.update(arr.tobytes())
        return h.hexdigest()

    def _blobs(self) -> dict:
        return {
            "h_true": _complex_le(self.h_true),
            "y_p": _complex_le(self.y_p),
            "x_p": _complex_le(self.x_p),
            "snr_db": np.ascontiguousarray(self.snr_db, dtype="<f4"),
            "speed_mps": np.ascontiguousarray(self.speed_mps, dtype="<f4"),
        }


def _complex_le(arr: np.ndarray) -> np.ndarray:
    """Complex array as interleaved little-endian float32 (re, im)."""
    arr = np.ascontiguousarray(arr, dtype=np.complex64)
    return np.ascontiguousarray(arr.view(np.float32).astype("<f4", copy=False))


def generate(family: ScenarioFamily, n_samples: int, master_seed: int) -> Dataset:
    """Round-robin over (SNR, speed) domain pairs, one derived seed per sample."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    pairs = family.domain_pairs()
    samples = []
    for i in range(n_samples):
        snr, speed = pairs[i % len(pairs)]
        samples.append(generate_sample(family, snr, speed, derive_seed(master_seed, "sample", i)))
    return Dataset(
        family=family,
        h_true=np.stack([s.h_true for s in samples]),
        y_p=np.stack([s.y_p for s in samples]),
        x_p=np.stack([s.x_p for s in samples]),
        snr_db=np.array([s.snr_db for s in samples], dtype=np.float32),
        speed_mps=np.array([s.speed_mps for s in samples], dtype=np.float32),
        sample_seeds=np.array([s.sample_seed for s in samples], dtype=np.uint64),
        master_seed=int(master_seed),
    )


def split_sizes(n: int) -> tuple[int, int, int]:
    n_val = int(math.floor(0.1 * n + 0.5))
    n_test = int(math.floor(0.1 * n + 0.5))
    return n - n_val - n_test, n_val, n_test


def split(dataset: Dataset, master_seed: int) -> tuple[Dataset, Dataset, Dataset]:
    """Random 80/10/10 split; also records the assignment on ``dataset``."""
    n = len(dataset)
    if n < 10:
        raise ValueError(f"need at least 10 samples to split, got {n}")
    n_train, n_val, _ = split_sizes(n)
    perm = rng_for(derive_seed(master_seed, "split")).permutation(n)
    assignment = np.empty(n, dtype=np.int8)
    assignment[perm[:n_train]] = 0
    assignment[perm[n_train : n_train + n_val]] = 1
    assignment[perm[n_train + n_val :]] = 2
    dataset.split = assignment
    return tuple(dataset.get_split(name) for name in SPLIT_NAMES)


def save(dataset: Dataset, path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    blobs = {}
    for name, arr in dataset._blobs().items():
        raw = arr.tobytes()
        (path / f"{name}.bin").write_bytes(raw)
        blobs[name] = {
            "file": f"{name}.bin",
            "dtype": "float32-le",
            "complex_interleaved": name in ("h_true", "y_p", "x_p"),
            "shape": [int(v) for v in getattr(dataset, name).shape],
            "sha256": hashlib.sha256(raw).hexdigest(),
        }
    manifest = {
        "format_version": FORMAT_VERSION,
        "n_samples": len(dataset),
        "master_seed": str(dataset.master_seed),
        "family": dataset.family.to_dict(),
        "sample_seeds": [str(int(s)) for s in dataset.sample_seeds],
        "splits": {name: [int(i) for i in dataset.split_indices(name)] for name in SPLIT_NAMES},
        "blobs": blobs,
    }
    tmp = path / (MANIFEST + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    os.replace(tmp, path / MANIFEST)
    return path


def read_manifest(path) -> dict:
    manifest = json.loads((Path(path) / MANIFEST).read_text())
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionError(f"unsupported dataset format version {version!r}")
    return manifest


def load(path) -> Dataset:
    path = Path(path)
    manifest = read_manifest(path)
    arrays = {}
    for name, meta in manifest["blobs"].items():
        raw = (path / meta["file"]).read_bytes()
        if hashlib.sha256(raw).hexdigest() != meta["sha256"]:
            raise ChecksumError(f"checksum mismatch in {meta['file']}")
        arr = np.frombuffer(raw, dtype="<f4")
        if meta["complex_interleaved"]:
            arr = arr.astype(np.float32).view(np.complex64)
        arrays[name] = arr.reshape(meta["shape"]).copy()
    n = manifest["n_samples"]
    split_arr = np.full(n, -1, dtype=np.int8)
    for code, name in enumerate(SPLIT_NAMES):
        split_arr[manifest["splits"][name]] = code
    return Dataset(
        family=ScenarioFamily.from_dict(manifest["family"]),
        h_true=arrays["h_true"],
        y_p=arrays["y_p"],
        x_p=arrays["x_p"],
        snr_db=arrays["snr_db"].astype(np.float32),
        speed_mps=arrays["speed_mps"].astype(np.float32),
        sample_seeds=np.array([int(s) for s in manifest["sample_seeds"]], dtype=np.uint64),
        master_seed=int(manifest["master_seed"]),
        split=split_arr,
    )
