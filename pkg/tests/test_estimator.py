import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from mbsts import MBSTS, DimensionError, ValidationError


def series(n=90, seed=0, P=1):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, P))
    level = 20 + np.cumsum(rng.normal(0, 0.3, (n, 2)), axis=0)
    y = level + X @ np.array([[1.5, -1.0]])[:P] + rng.normal(0, 0.3, (n, 2))
    return X, y


@pytest.fixture(scope="module")
def fitted():
    X, y = series()
    model = MBSTS(seasonal_period=0, niter=120, burn_in=20, random_state=1).fit(X[:70], y[:70])
    return model, X, y


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        MBSTS().predict(n_steps=3)


def test_params_and_clone():
    m = MBSTS(niter=50, h=0.3)
    assert m.get_params()["h"] == 0.3
    c = clone(m)
    assert c.get_params() == m.get_params() and c is not m


def test_predict_shapes(fitted):
    model, X, _ = fitted
    mean = model.predict(X[70:])
    lo, hi = model.predict_interval(X[70:])
    assert mean.shape == lo.shape == (20, 2)
    assert np.all(lo <= mean) and np.all(mean <= hi)
    assert model.sample(X[70:]).shape == (120, 20, 2)


def test_prediction_tracks_held_out(fitted):
    model, X, y = fitted
    lo, hi = model.predict_interval(X[70:75])
    inside = (y[70:75] >= lo) & (y[70:75] <= hi)
    assert inside.mean() >= 0.7


def test_predict_is_repeatable(fitted):
    model, X, _ = fitted
    np.testing.assert_array_equal(model.predict(X[70:]), model.predict(X[70:]))
    a = model.sample(X[70:], random_state=3)
    assert not np.array_equal(a, model.sample(X[70:], random_state=4))


def test_future_covariate_checks(fitted):
    model, X, _ = fitted
    with pytest.raises(ValidationError):
        model.predict()
    with pytest.raises(DimensionError):
        model.predict(np.ones((5, 3)))
    with pytest.raises(DimensionError):
        model.predict(X[70:], n_steps=4)


def test_effects_and_replicate(fitted):
    model, X, y = fitted
    eff = model.effects(y[70:] + 5.0, X[70:])
    assert eff.pointwise.shape == (120, 20, 2)
    assert np.all(eff.temporal_average[:, -1].mean(axis=0) > 2.0)
    reps = model.replicate(random_state=0)
    assert reps.shape == (120, 70, 2)


def test_fit_without_covariates():
    _, y = series()
    m = MBSTS(seasonal_period=7, niter=20, burn_in=5).fit(None, y[:60, 0])
    assert m.n_features_in_ == 0 and m.n_outputs_ == 1
    assert m.predict(n_steps=4).shape == (4, 1)


def test_fit_validation():
    X, y = series()
    with pytest.raises(DimensionError):
        MBSTS(niter=5).fit(X[:10], y[:12])
    with pytest.raises(ValidationError):
        MBSTS(trend=False, seasonal_period=0, niter=5).fit(X[:30], y[:30])
    with pytest.raises(ValidationError):
        MBSTS(niter=5, random_state="seed").fit(X[:30], y[:30])


def test_same_random_state_same_fit():
    X, y = series(n=50)
    a = MBSTS(niter=15, burn_in=3, random_state=7).fit(X, y)
    b = MBSTS(niter=15, burn_in=3, random_state=7).fit(X, y)
    np.testing.assert_array_equal(a.draws_.sigma_eps, b.draws_.sigma_eps)
