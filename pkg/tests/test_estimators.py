import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from cebed.classical import PilotObservation
from cebed.data import generate
from cebed.estimators import ALMMSEEstimator, LMMSEEstimator, LSEstimator, NeuralEstimator, make_estimator
from cebed.metrics import mse


@pytest.fixture(scope="module")
def splits(small_dataset):
    return small_dataset.get_split("train"), small_dataset.get_split("val"), small_dataset.get_split("test")


class TestClassicalEstimators:
    def test_params_and_clone(self):
        est = ALMMSEEstimator(rank=4)
        assert est.get_params() == {"rank": 4}
        assert clone(est).rank == 4
        assert clone(est).set_params(rank=2).rank == 2

    @pytest.mark.parametrize("cls", [LSEstimator, LMMSEEstimator, ALMMSEEstimator])
    def test_not_fitted(self, cls, splits):
        with pytest.raises(NotFittedError):
            cls().predict(splits[2].observations())

    def test_fit_predict_score(self, splits):
        train, _, test = splits
        ls = LSEstimator().fit_dataset(train)
        lmmse = LMMSEEstimator().fit_dataset(train)
        pred = lmmse.predict_dataset(test)
        assert pred.shape == test.h_true.shape
        assert lmmse.score(test.observations(), test.h_true) == pytest.approx(-mse(pred, test.h_true))
        assert lmmse.score(test.observations(), test.h_true) > ls.score(test.observations(), test.h_true)

    def test_layout_mismatch(self, splits, small_family):
        est = LMMSEEstimator().fit_dataset(splits[0])
        other = generate(small_family.replace(n_fp=36), 12, 1)
        with pytest.raises(ValueError):
            est.predict_dataset(other)

    def test_antenna_mismatch(self, splits, small_family):
        est = LSEstimator().fit_dataset(splits[0])
        lmmse = LMMSEEstimator().fit_dataset(splits[0])
        other = generate(small_family.replace(n_r=4), 12, 1)
        est.predict_dataset(other)  # LS is per-antenna and has no stats
        with pytest.raises(ValueError):
            lmmse.predict_dataset(other)

    def test_input_validation(self, splits):
        obs = splits[0].observations()
        with pytest.raises(TypeError):
            LSEstimator().fit(obs.y_p)
        with pytest.raises(ValueError):
            LMMSEEstimator().fit(obs, splits[0].h_true[:-1])
        unbatched = PilotObservation(obs.y_p[0], obs.x_p[0], obs.pattern, 0.1)
        with pytest.raises(ValueError):
            LSEstimator().fit(unbatched)

    def test_make_estimator(self):
        assert isinstance(make_estimator("lmmse"), LMMSEEstimator)
        assert make_estimator("ALMMSE", rank=3).rank == 3
        assert make_estimator("ddae", batch_size=8).batch_size == 8
        with pytest.raises(ValueError):
            make_estimator("wiener")


class TestNeuralEstimator:
    def test_fit_predict_checkpoint(self, splits):
        train, val, test = splits
        est = NeuralEstimator("InReEsNet", hyper={"width": 4, "blocks": 1}, batch_size=32, max_epochs=2, seed=1)
        est.fit(train.observations(), train.h_true, eval_set=(val.observations(), val.h_true))
        assert len(est.history_.epochs) == 2
        pred = est.predict_dataset(test)
        assert pred.shape == test.h_true.shape and np.all(np.isfinite(pred))
        back = NeuralEstimator.from_checkpoint(est.checkpoint(), est.pattern_)
        np.testing.assert_array_equal(back.predict_dataset(test), pred)
        assert back.get_params()["hyper"] == {"width": 4, "blocks": 1}

    def test_internal_validation_split(self, splits):
        train = splits[0]
        est = NeuralEstimator("MReEsNet", hyper={"width": 4, "blocks": 1}, batch_size=64, max_epochs=1)
        est.fit(train.observations(), train.h_true)
        assert est.history_.epochs[0].val_loss > 0

    def test_deterministic_fit(self, splits):
        train, val, _ = splits
        kw = dict(model="DDAE", hyper={"hidden": (32, 16, 32)}, batch_size=32, max_epochs=2, seed=5)
        runs = [
            NeuralEstimator(**kw).fit(train.observations(), train.h_true, eval_set=(val.observations(), val.h_true))
            for _ in range(2)
        ]
        assert runs[0].checkpoint() == runs[1].checkpoint()
        assert runs[0].history_.val_losses == runs[1].history_.val_losses

    def test_get_params_roundtrip(self):
        est = NeuralEstimator("MTRE", initial_lr=5e-4)
        assert clone(est).get_params() == est.get_params()
