"""Scikit-learn estimator facade."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import MinMaxScaler

from spherenn import ConstrainedNetRegressor, Domain, forward_batch, target_sine


def _sine_xy(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, (n, 1))
    y = np.array([target_sine(v) for v in x[:, 0]])
    return x, y


class TestEstimator:
    def test_fit_predict_shapes(self):
        x, y = _sine_xy(60, 1)
        model = ConstrainedNetRegressor(hidden_layers=(10,), max_iters=150)
        assert model.fit(x, y) is model
        pred = model.predict(x)
        assert pred.shape == (60,)
        assert model.n_features_in_ == 1

    def test_beats_constant_predictor(self):
        x, y = _sine_xy(120, 2)
        model = ConstrainedNetRegressor(hidden_layers=(16,), max_iters=2000,
                                        tight_1d=True,
                                        domain=Domain.unit_box(1))
        model.fit(x, y)
        baseline = float(np.mean((y - y.mean()) ** 2))
        assert model.report_.final_train_mse < 0.3 * baseline

    def test_constrained_fit_feasible(self):
        x, y = _sine_xy(40, 3)
        model = ConstrainedNetRegressor(hidden_layers=(8,), max_iters=60,
                                        domain=Domain.unit_box(1))
        model.fit(x, y)
        assert model.report_.constraint_violation <= 1e-10
        norms = np.linalg.norm(model.network_.layers[0].weights, axis=0)
        assert np.max(np.abs(norms - 1.0)) <= 1e-10

    def test_unconstrained_mode(self):
        x, y = _sine_xy(40, 4)
        model = ConstrainedNetRegressor(constrained=False, max_iters=30)
        model.fit(x, y)
        assert model.constraint_spec_ is None
        assert model.report_.constraint_violation == 0.0

    def test_domain_inferred_from_data(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(-2, 3, (50, 2))
        y = rng.uniform(-1, 1, 50)
        model = ConstrainedNetRegressor(hidden_layers=(6,), max_iters=20)
        model.fit(x, y)
        np.testing.assert_array_equal(model.domain_.lower, x.min(axis=0))
        np.testing.assert_array_equal(model.domain_.upper, x.max(axis=0))

    def test_predict_matches_network(self):
        x, y = _sine_xy(30, 6)
        model = ConstrainedNetRegressor(hidden_layers=(6,), max_iters=40)
        model.fit(x, y)
        np.testing.assert_array_equal(model.predict(x),
                                      forward_batch(model.network_, x))

    def test_deterministic_given_random_state(self):
        x, y = _sine_xy(40, 7)
        a = ConstrainedNetRegressor(max_iters=50, random_state=3).fit(x, y)
        b = ConstrainedNetRegressor(max_iters=50, random_state=3).fit(x, y)
        np.testing.assert_array_equal(a.predict(x), b.predict(x))

    def test_clone_and_get_params(self):
        model = ConstrainedNetRegressor(hidden_layers=(5, 5), step_size=0.02)
        params = model.get_params()
        assert params["hidden_layers"] == (5, 5)
        assert params["step_size"] == 0.02
        cloned = clone(model)
        assert cloned.get_params() == params

    def test_set_params(self):
        model = ConstrainedNetRegressor()
        model.set_params(optimizer="lbfgs", max_iters=10)
        assert model.optimizer == "lbfgs"

    def test_in_pipeline(self):
        x, y = _sine_xy(50, 8)
        pipe = Pipeline([
            ("scale", MinMaxScaler()),
            ("net", ConstrainedNetRegressor(hidden_layers=(6,),
                                            max_iters=30)),
        ])
        pipe.fit(x, y)
        assert pipe.predict(x).shape == (50,)

    def test_predict_before_fit_rejected(self):
        model = ConstrainedNetRegressor()
        with pytest.raises(Exception):
            model.predict(np.zeros((2, 1)))

    def test_feature_count_checked(self):
        x, y = _sine_xy(20, 9)
        model = ConstrainedNetRegressor(hidden_layers=(4,), max_iters=5)
        model.fit(x, y)
        with pytest.raises(ValueError, match="features"):
            model.predict(np.zeros((3, 2)))

    def test_bad_domain_rejected(self):
        x, y = _sine_xy(10, 10)
        model = ConstrainedNetRegressor(domain="unit")
        with pytest.raises(ValueError, match="Domain"):
            model.fit(x, y)

    def test_domain_dimension_checked(self):
        x, y = _sine_xy(10, 11)
        model = ConstrainedNetRegressor(domain=Domain.unit_box(2))
        with pytest.raises(ValueError, match="dimension"):
            model.fit(x, y)

    def test_canonicalized_equivalent(self):
        x, y = _sine_xy(40, 12)
        model = ConstrainedNetRegressor(hidden_layers=(8,), max_iters=60,
                                        domain=Domain.unit_box(1))
        model.fit(x, y)
        canon, report = model.canonicalized()
        pred_orig = model.predict(x)
        pred_canon = forward_batch(canon, x)
        np.testing.assert_allclose(pred_canon, pred_orig,
                                   rtol=1e-9, atol=1e-12)
        assert report.max_pointwise_deviation <= 1e-9
