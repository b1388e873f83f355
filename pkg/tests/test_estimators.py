import numpy as np
import pytest
from sklearn.base import clone
from sklearn.model_selection import cross_val_score

from ridge_mml import BayesianRidgeClassifierMML, BayesianRidgeMML
from ridge_mml.core import estimate_rr
from ridge_mml.data import load_builtin, prepare_design


@pytest.fixture(scope="module")
def iris():
    ds = load_builtin("iris")
    return ds.covariates, ds.response


def test_params_and_clone():
    est = BayesianRidgeMML(model="prr", a=0.01)
    params = est.get_params()
    assert params["model"] == "prr" and params["a"] == 0.01
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(model="grr")
    assert est.model == "grr"


def test_fit_matches_core(iris):
    X, y = iris
    est = BayesianRidgeMML().fit(X, y)
    ref = estimate_rr(prepare_design(load_builtin("iris")))
    assert est.lambda_ == pytest.approx(ref.lambda_hat)
    assert est.log_marginal_likelihood_ == pytest.approx(ref.log_ml)
    # the original-scale coefficients reproduce the standardized predictions
    pred = est.predict(X)
    np.testing.assert_allclose(pred, est.intercept_ + X @ est.coef_, rtol=1e-10)
    assert est.score(X, y) > 0.8


def test_predict_std(iris):
    X, y = iris
    est = BayesianRidgeMML(model="grr").fit(X, y)
    mean, sd = est.predict(X[:5], return_std=True)
    assert mean.shape == sd.shape == (5,)
    assert np.all(sd > 0)


def test_feature_count_checked(iris):
    X, y = iris
    est = BayesianRidgeMML().fit(X, y)
    with pytest.raises(ValueError):
        est.predict(X[:, :2])


def test_reports(iris):
    X, y = iris
    est = BayesianRidgeMML(model="prr").fit(X, y)
    assert est.significance().sn.shape == (3,)
    assert est.diagnostics().hat_diag.shape == (150,)
    assert est.delta_ == pytest.approx(-0.530, abs=0.005)


def test_works_in_cross_validation(iris):
    X, y = iris
    scores = cross_val_score(BayesianRidgeMML(), X, y, cv=3)
    assert scores.shape == (3,)


def test_classifier():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(120, 3))
    labels = np.where(X @ np.array([2.0, -1.0, 0.0]) + 0.3 * rng.normal(size=120) > 0,
                      "yes", "no")
    clf = BayesianRidgeClassifierMML().fit(X, labels)
    assert list(clf.classes_) == ["no", "yes"]
    proba = clf.predict_proba(X)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert np.all((proba >= 0) & (proba <= 1))
    assert clf.score(X, labels) > 0.85
    assert "scale_y" not in clf.get_params()
    with pytest.raises(ValueError):
        BayesianRidgeClassifierMML().fit(X, np.arange(120) % 3)
