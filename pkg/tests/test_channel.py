import numpy as np
import pytest

from cebed.channel import (
    RMS_DELAY_SPREAD,
    ChannelProfile,
    NoiseSpec,
    awgn,
    exponential_pdp,
    get_profile,
    noise_sigma2,
    normalize_energy,
    raw_channel,
    sample_channel,
    spatial_covariance,
    transmit,
)
from cebed.grid import ComplexGrid, GridDims, Profile, ScenarioSpec, qpsk_grid, rng_for


def _draws(profile, n, dims, speed, seed=0):
    rng = rng_for(seed)
    return np.stack([raw_channel(profile, 1, dims, speed, rng)[0] for _ in range(n)])


class TestProfile:
    @pytest.mark.parametrize("name", ["umi-like", "uma-like"])
    def test_presets(self, name):
        p = get_profile(name)
        assert np.isclose(sum(p.tap_powers), 1.0, atol=1e-12)
        assert np.all(np.diff(p.tap_delays) > 0)
        assert p.rms_delay_spread == pytest.approx(RMS_DELAY_SPREAD[Profile.parse(name)], rel=1e-9)

    def test_uma_has_larger_spread(self):
        assert get_profile("uma-like").rms_delay_spread > get_profile("umi-like").rms_delay_spread

    def test_pdp_decays(self):
        _, powers = exponential_pdp(100e-9)
        assert np.all(np.diff(powers) < 0)

    @pytest.mark.parametrize(
        "delays, powers",
        [((), ()), ((0, 0), (0.5, 0.5)), ((0, 1e-7), (1.2, -0.2)), ((0, 1e-7), (0.6, 0.3))],
    )
    def test_rejects_bad_taps(self, delays, powers):
        with pytest.raises(ValueError):
            ChannelProfile("umi-like", delays, powers)


class TestNoise:
    @pytest.mark.parametrize("snr, sigma2", [(0, 1.0), (20, 0.01), (-30, 1000.0)])
    def test_sigma2(self, snr, sigma2):
        assert noise_sigma2(snr).sigma2 == pytest.approx(sigma2, rel=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            NoiseSpec(-1e-3)

    def test_awgn_variance(self):
        w = awgn(rng_for(3), (100_000,), 0.25)
        assert np.var(w) == pytest.approx(0.25, rel=0.02)
        assert np.var(w.real) == pytest.approx(0.125, rel=0.03)


class TestSpatialCovariance:
    def test_single_antenna(self):
        np.testing.assert_array_equal(spatial_covariance(1), [[1.0]])

    def test_zero_coeff_identity(self):
        np.testing.assert_array_equal(spatial_covariance(8, 0.0), np.eye(8))

    def test_psd(self):
        assert np.linalg.eigvalsh(spatial_covariance(16, 0.9)).min() >= -1e-12

    def test_coeff_one_rejected(self):
        with pytest.raises(ValueError):
            spatial_covariance(4, 1.0)


class TestSampleChannel:
    def test_unit_energy(self):
        g = sample_channel(ScenarioSpec(n_r=4, speed_mps=10.0), get_profile("umi-like"), seed=1)
        assert g.shape == (4, 72, 14)
        assert np.mean(np.abs(g.data) ** 2) == pytest.approx(1.0, abs=1e-9)

    def test_static_channel_frozen_in_time(self):
        g = sample_channel(ScenarioSpec(profile="uma-like", speed_mps=0.0), get_profile("uma-like"), seed=2)
        assert np.max(np.abs(g.data - g.data[..., :1])) < 1e-9

    def test_deterministic(self):
        spec, prof = ScenarioSpec(speed_mps=5.0), get_profile("umi-like")
        assert sample_channel(spec, prof, 9) == sample_channel(spec, prof, 9)
        assert sample_channel(spec, prof, 9) != sample_channel(spec, prof, 10)

    def test_profile_mismatch(self):
        with pytest.raises(ValueError):
            sample_channel(ScenarioSpec(profile="uma-like"), get_profile("umi-like"), 0)

    @pytest.mark.parametrize("c", [1e-3, 0.5, 7.0, 1e4])
    def test_normalisation_scale_invariant(self, c):
        h = raw_channel(get_profile("umi-like"), 2, GridDims(), 3.0, rng_for(4))
        np.testing.assert_allclose(normalize_energy(c * h), normalize_energy(h), atol=1e-9)

    def test_spatial_correlation(self):
        rng = rng_for(5)
        h = np.stack([raw_channel(get_profile("umi-like"), 4, GridDims(8, 1), 0.0, rng)[:, :, 0] for _ in range(3000)])
        h = h.transpose(1, 0, 2).reshape(4, -1)
        r = h @ h.conj().T / h.shape[1]
        np.testing.assert_allclose(np.abs(r), spatial_covariance(4), atol=0.06)


class TestChannelStatistics:
    def test_frequency_correlation_decreases(self):
        h = _draws(get_profile("umi-like"), 10_000, GridDims(72, 1), 0.0)[..., 0]
        corr = [abs(np.mean(h[:, 0] * h[:, d].conj())) / np.mean(abs(h[:, 0]) ** 2) for d in (1, 8, 36)]
        assert corr[0] + 0.02 >= corr[1] and corr[1] + 0.02 >= corr[2]
        assert corr[0] > corr[2]

    def test_doppler_decorrelates(self):
        prof = get_profile("umi-like")

        def temporal_corr(speed):
            h = _draws(prof, 10_000, GridDims(1, 14), speed, seed=7)[:, 0]
            return abs(np.mean(h[:, 0] * h[:, 13].conj())) / np.mean(abs(h[:, 0]) ** 2)

        c = [temporal_corr(v) for v in (0.0, 5.0, 15.0, 60.0)]
        for lo, hi in zip(c, c[1:]):
            assert hi <= lo + 0.02
        assert c[0] == pytest.approx(1.0, abs=1e-9)
        assert c[-1] < 0.9


class TestTransmit:
    def setup_method(self):
        self.H = sample_channel(ScenarioSpec(speed_mps=5.0), get_profile("umi-like"), 1)
        self.X = qpsk_grid(2, GridDims())

    def test_noiseless_is_hadamard(self):
        Y = transmit(self.H, self.X, NoiseSpec(0.0), seed=3)
        np.testing.assert_allclose(Y.data, self.H.data * self.X.data, rtol=0, atol=1e-15)

    def test_all_ones_passthrough(self):
        ones = ComplexGrid(GridDims(), 1, np.ones((72, 14)))
        assert transmit(self.H, ones, NoiseSpec(0.0), seed=0) == self.H

    def test_noise_variance(self):
        dims = GridDims(1000, 100)
        H = ComplexGrid(dims, 1, np.ones(dims.shape))
        X = qpsk_grid(1, dims)
        Y = transmit(H, X, NoiseSpec(0.25), seed=5)
        assert np.var(Y.data - H.data * X.data) == pytest.approx(0.25, rel=0.02)

    def test_deterministic(self):
        a = transmit(self.H, self.X, NoiseSpec(0.1), seed=4)
        assert a == transmit(self.H, self.X, NoiseSpec(0.1), seed=4)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            transmit(self.H, qpsk_grid(1, GridDims(36, 14)), NoiseSpec(0.1), 0)
