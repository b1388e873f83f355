"""scikit-learn compatible estimators wrapping the MML ridge fits."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import DEFAULT_A, DEFAULT_B, LAMBDA_MAX, fit_mml
from .data import DEFAULT_RANK_TOL, UNIT_VARIANCE, Dataset, prepare_design
from .posterior import (
    class_probability,
    diagnostics,
    posterior_fit,
    predictive,
    significance,
)


class _MMLBase(BaseEstimator):
    def __init__(self, model="rr", a=DEFAULT_A, b=DEFAULT_B, standardize=UNIT_VARIANCE,
                 scale_y=True, lambda_max=LAMBDA_MAX, rank_tol=DEFAULT_RANK_TOL):
        self.model = model
        self.a = a
        self.b = b
        self.standardize = standardize
        self.scale_y = scale_y
        self.lambda_max = lambda_max
        self.rank_tol = rank_tol

    def _fit_design(self, X, y):
        dataset = Dataset(y, X)
        self.design_ = prepare_design(dataset, self.standardize, self.scale_y,
                                      self.rank_tol)
        self.mml_ = fit_mml(self.design_, self.model, self.a, self.b, self.lambda_max)
        self.posterior_ = posterior_fit(self.design_, self.mml_.profile, self.a, self.b)
        s = self.design_.standardization
        self.coef_ = s.y_scale * self.posterior_.beta_bar / s.x_scales
        self.intercept_ = s.y_mean - float(self.coef_ @ s.x_means)
        self.lambda_ = self.mml_.lambda_hat
        self.delta_ = self.mml_.delta_hat
        self.log_marginal_likelihood_ = self.mml_.log_ml
        self.n_features_in_ = X.shape[1]
        return self

    def _standardized(self, X):
        check_is_fitted(self, "posterior_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self.design_.standardization.transform_covariates(X)

    def significance(self):
        """Credible-interval and scaled-neighborhood report per covariate."""
        check_is_fitted(self, "posterior_")
        return significance(self.posterior_, column_names=self.design_.column_names)

    def diagnostics(self, exact_residuals=False):
        check_is_fitted(self, "posterior_")
        return diagnostics(self.posterior_, self.design_, exact_residuals)


class BayesianRidgeMML(RegressorMixin, _MMLBase):
    """Bayesian ridge regression with marginal-likelihood shrinkage selection.

    Parameters
    ----------
    model : {"rr", "prr", "grr"}
        Ridge, power ridge or generalized (per-component) ridge prior.
    a, b : float
        Inverse-gamma prior on the error variance.
    standardize : {"unit_variance", "unit_sum_of_squares"}
    scale_y : bool
        Scale the response to unit variance before fitting.
    lambda_max : float
        Upper end of the shrinkage search range.
    rank_tol : float
        Relative singular value cutoff for the thin SVD.

    Attributes
    ----------
    coef_, intercept_ : coefficients on the original scale
    lambda_ : float or ndarray
        Estimated shrinkage (a vector for ``model="grr"``).
    delta_ : float
        Estimated power for ``model="prr"`` (0 otherwise).
    log_marginal_likelihood_ : float
    """

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        return self._fit_design(X, y)

    def predict(self, X, return_std=False):
        """Posterior predictive mean, optionally with its standard deviation."""
        Xs = self._standardized(X)
        s = self.design_.standardization
        mean, var, _ = predictive(self.posterior_, self.design_, np.atleast_2d(Xs))
        mean = s.inverse_response(mean)
        if return_std:
            return mean, s.y_scale * np.sqrt(var)
        return mean


class BayesianRidgeClassifierMML(ClassifierMixin, _MMLBase):
    """Binary classifier from a ridge fit to +/-1 coded labels.

    Class probabilities come from the Student posterior predictive
    distribution of the coded response.
    """

    def __init__(self, model="rr", a=DEFAULT_A, b=DEFAULT_B, standardize=UNIT_VARIANCE,
                 lambda_max=LAMBDA_MAX, rank_tol=DEFAULT_RANK_TOL):
        super().__init__(model, a, b, standardize, False, lambda_max, rank_tol)

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = unique_labels(y)
        if self.classes_.shape[0] != 2:
            raise ValueError("BayesianRidgeClassifierMML supports exactly two classes")
        coded = np.where(y == self.classes_[1], 1.0, -1.0)
        return self._fit_design(X, coded)

    def predict_proba(self, X):
        Xs = self._standardized(X)
        p1 = np.atleast_1d(class_probability(self.posterior_, self.design_,
                                             np.atleast_2d(Xs),
                                             self.design_.standardization.y_mean))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return self.classes_[(self.predict_proba(X)[:, 1] > 0.5).astype(int)]
