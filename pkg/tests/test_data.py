import json
from collections import Counter

import numpy as np
import pytest

from cebed import data
from cebed.data import ChecksumError, FormatVersionError, ScenarioFamily, generate, generate_sample, split, split_sizes


class TestScenarioFamily:
    def test_domain_pairs(self):
        fam = ScenarioFamily()
        assert len(fam.domain_pairs()) == 20
        assert fam.domain_pairs()[:2] == [(0.0, 0.0), (0.0, 5.0)]

    def test_empty_domains_rejected(self):
        with pytest.raises(ValueError):
            ScenarioFamily(snr_domains=())
        with pytest.raises(ValueError):
            ScenarioFamily(speed_domains=())

    def test_invalid_scenario_rejected(self):
        with pytest.raises(ValueError):
            ScenarioFamily(n_r=3)

    def test_dict_roundtrip(self):
        fam = ScenarioFamily("uma-like", 4, 36, 1, (0.0, 10.0), (5.0,))
        assert ScenarioFamily.from_dict(json.loads(json.dumps(fam.to_dict()))) == fam
        assert fam.label() == "uma-like/nr4/fp36/sp1"


class TestGenerate:
    def test_balanced_full_size(self):
        fam = ScenarioFamily()
        counts = Counter(fam.domain_pairs()[i % 20] for i in range(15000))
        assert set(counts.values()) == {750}

    def test_desk_scale_balance(self):
        fam = ScenarioFamily(snr_domains=(0.0, 10.0, 20.0), speed_domains=(5.0,))
        pairs = fam.domain_pairs()
        counts = Counter(pairs[i % len(pairs)] for i in range(2000))
        assert max(counts.values()) - min(counts.values()) <= 1
        assert all(abs(c - 667) <= 1 for c in counts.values())

    def test_generated_balance_and_shapes(self, small_dataset):
        ds = small_dataset
        assert len(ds) == 120
        assert ds.h_true.shape == (120, 1, 72, 14) and ds.h_true.dtype == np.complex64
        assert ds.y_p.shape == (120, 1, 72, 2)
        counts = Counter(zip(ds.snr_db.tolist(), ds.speed_mps.tolist()))
        assert max(counts.values()) - min(counts.values()) <= 1

    def test_same_seed_identical(self, small_family, small_dataset):
        again = generate(small_family, 120, master_seed=11)
        assert again.fingerprint() == small_dataset.fingerprint()
        assert generate(small_family, 120, master_seed=12).fingerprint() != small_dataset.fingerprint()

    def test_sample_regeneration_isolated(self, small_family, small_dataset):
        # regenerate in reverse order from the recorded seeds only
        for i in reversed(range(0, 120, 17)):
            s = generate_sample(small_family, float(small_dataset.snr_db[i]), float(small_dataset.speed_mps[i]), int(small_dataset.sample_seeds[i]))
            assert s.h_true.tobytes() == small_dataset.h_true[i].tobytes()
            assert s.y_p.tobytes() == small_dataset.y_p[i].tobytes()

    def test_unit_energy_channels(self, small_dataset):
        energy = np.mean(np.abs(small_dataset.h_true.astype(np.complex128)) ** 2, axis=(1, 2, 3))
        np.testing.assert_allclose(energy, 1.0, atol=1e-6)

    def test_noise_level_matches_snr(self, small_family):
        ds = generate(small_family.replace(snr_domains=(10.0,)), 200, master_seed=3)
        p = ds.pattern
        h_p = ds.h_true[..., list(p.subcarrier_positions), :][..., list(p.symbol_positions)]
        noise = ds.y_p - h_p * ds.x_p[:, None]
        assert np.mean(np.abs(noise) ** 2) == pytest.approx(0.1, rel=0.05)

    def test_rejects_empty(self, small_family):
        with pytest.raises(ValueError):
            generate(small_family, 0, 1)


class TestSplit:
    @pytest.mark.parametrize("n, sizes", [(15000, (12000, 1500, 1500)), (10, (8, 1, 1)), (2000, (1600, 200, 200)), (25, (19, 3, 3))])
    def test_sizes(self, n, sizes):
        assert split_sizes(n) == sizes

    def test_disjoint_exhaustive(self, small_dataset):
        parts = [set(small_dataset.split_indices(name)) for name in data.SPLIT_NAMES]
        assert set().union(*parts) == set(range(len(small_dataset)))
        assert sum(len(p) for p in parts) == len(small_dataset)
        assert [len(p) for p in parts] == [96, 12, 12]

    def test_deterministic(self, small_family):
        a, b = generate(small_family, 50, 1), generate(small_family, 50, 1)
        split(a, 4)
        split(b, 4)
        np.testing.assert_array_equal(a.split, b.split)
        split(b, 5)
        assert not np.array_equal(a.split, b.split)

    def test_too_few(self, small_family):
        with pytest.raises(ValueError):
            split(generate(small_family, 9, 1), 0)


class TestStorage:
    def test_roundtrip(self, tmp_path, small_family):
        ds = generate(small_family, 100, master_seed=5)
        split(ds, 5)
        data.save(ds, tmp_path / "ds")
        back = data.load(tmp_path / "ds")
        assert back.family == ds.family and back.master_seed == 5
        for name in ("h_true", "y_p", "x_p", "snr_db", "speed_mps", "sample_seeds", "split"):
            np.testing.assert_array_equal(getattr(back, name), getattr(ds, name))

    def test_manifest_schema(self, tmp_path, small_dataset):
        data.save(small_dataset, tmp_path / "ds")
        m = json.loads((tmp_path / "ds" / "manifest.json").read_text())
        assert m["format_version"] == 1
        assert m["n_samples"] == 120
        assert m["family"]["profile"] == "umi-like"
        assert set(m["blobs"]) == {"h_true", "y_p", "x_p", "snr_db", "speed_mps"}

    def test_bytes_reproducible(self, tmp_path, small_family):
        for run in ("a", "b"):
            ds = generate(small_family, 30, master_seed=8)
            split(ds, 8)
            data.save(ds, tmp_path / run)
        for f in sorted(p.name for p in (tmp_path / "a").iterdir()):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_blob_layout(self, tmp_path, small_dataset):
        data.save(small_dataset, tmp_path / "ds")
        raw = np.fromfile(tmp_path / "ds" / "x_p.bin", dtype="<f4")
        np.testing.assert_array_equal(raw[:2], [small_dataset.x_p[0, 0, 0].real, small_dataset.x_p[0, 0, 0].imag])

    def test_corrupt_byte_detected(self, tmp_path, small_dataset):
        path = data.save(small_dataset, tmp_path / "ds")
        blob = bytearray((path / "y_p.bin").read_bytes())
        blob[100] ^= 0xFF
        (path / "y_p.bin").write_bytes(bytes(blob))
        with pytest.raises(ChecksumError):
            data.load(path)

    def test_version_mismatch(self, tmp_path, small_dataset):
        path = data.save(small_dataset, tmp_path / "ds")
        m = json.loads((path / "manifest.json").read_text())
        m["format_version"] = 2
        (path / "manifest.json").write_text(json.dumps(m))
        with pytest.raises(FormatVersionError):
            data.load(path)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(OSError):
            data.load(tmp_path / "nothing")
