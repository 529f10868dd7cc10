import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cebed.grid import ComplexGrid
from cebed.metrics import ci95, gain_db, mse, normalized_score, per_sample_mse

positive = st.floats(1e-6, 1e6, allow_nan=False)


class TestMSE:
    def test_identical(self):
        h = np.random.default_rng(0).standard_normal((2, 3, 4)) + 1j
        assert mse(h, h) == 0.0

    def test_zero_estimate_unit_energy(self):
        h = np.random.default_rng(1).standard_normal((4, 72, 14)) + 1j * np.random.default_rng(2).standard_normal((4, 72, 14))
        h /= np.sqrt(np.mean(np.abs(h) ** 2))
        assert mse(np.zeros_like(h), h) == pytest.approx(1.0, abs=1e-9)

    def test_single_cell(self):
        assert mse(np.array([[[1 + 1j]]]), np.zeros((1, 1, 1))) == 2.0

    def test_accepts_grids(self):
        g = ComplexGrid.from_array(np.ones((2, 2)))
        assert mse(g, np.zeros((1, 2, 2))) == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse(np.zeros((2, 3)), np.zeros((3, 2)))

    def test_antenna_permutation_invariant(self):
        rng = np.random.default_rng(3)
        a, b = rng.standard_normal((5, 4, 6, 3)), rng.standard_normal((5, 4, 6, 3))
        for perm in itertools.permutations(range(4)):
            assert mse(a[:, list(perm)], b[:, list(perm)]) == pytest.approx(mse(a, b), rel=1e-14)

    def test_per_sample(self):
        a = np.zeros((3, 2, 2))
        b = np.stack([np.zeros((2, 2)), np.ones((2, 2)), 2 * np.ones((2, 2))])
        np.testing.assert_array_equal(per_sample_mse(a, b), [0.0, 1.0, 4.0])


class TestGain:
    @pytest.mark.parametrize("ls, m, want", [(0.24, 0.017, 11.47), (152.81, 0.39, 25.92)])
    def test_reference_pairs(self, ls, m, want):
        assert abs(gain_db(ls, m) - want) <= 0.15

    def test_equal(self):
        assert gain_db(0.3, 0.3) == 0.0

    @given(positive, positive)
    def test_antisymmetric(self, a, b):
        assert gain_db(a, b) == pytest.approx(-gain_db(b, a), abs=1e-9)

    @pytest.mark.parametrize("a, b", [(0.0, 1.0), (1.0, -1.0)])
    def test_non_positive(self, a, b):
        with pytest.raises(ValueError):
            gain_db(a, b)


class TestNormalizedScore:
    def test_identities(self):
        assert normalized_score(0.01, 0.2, 0.01) == 100.0
        assert normalized_score(0.2, 0.2, 0.01) == 0.0
        assert normalized_score(0.15625, 0.25, 0.0625) == 50.0
        assert normalized_score(0.105, 0.2, 0.01) == pytest.approx(50.0, abs=1e-12)
        assert normalized_score(0.5, 0.2, 0.01) == 0.0

    def test_beyond_lmmse(self):
        assert normalized_score(0.0, 0.2, 0.1) == 200.0

    @given(positive, positive)
    def test_endpoints_property(self, ls, lmmse):
        if ls == lmmse:
            return
        assert normalized_score(lmmse, ls, lmmse) == pytest.approx(100.0)
        assert normalized_score(ls, ls, lmmse) == 0.0

    def test_degenerate(self):
        with pytest.raises(ValueError):
            normalized_score(0.1, 0.2, 0.2)


class TestCI95:
    def test_identical_values(self):
        assert ci95([0.5] * 4) == (0.5, 0.0)

    def test_five_values(self):
        mean, half = ci95([1, 2, 3, 4, 5])
        assert mean == 3.0
        assert half == pytest.approx(2.776445 * np.sqrt(2.5) / np.sqrt(5), rel=1e-6)
        assert half == pytest.approx(1.963, abs=1e-3)

    def test_two_values(self):
        mean, half = ci95([0, 2])
        assert mean == 1.0
        assert half == pytest.approx(12.7062, abs=1e-3)

    def test_too_few(self):
        with pytest.raises(ValueError):
            ci95([1.0])
