"""Data ingestion, standardization, thin SVD and feature expansions."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import (
    ConstantColumn,
    DimensionMismatch,
    IoError,
    NumericalFailure,
    TooFewRows,
    ZeroSingularValue,
)

UNIT_VARIANCE = "unit_variance"
UNIT_SUM_OF_SQUARES = "unit_sum_of_squares"
_MODES = (UNIT_VARIANCE, UNIT_SUM_OF_SQUARES)

DEFAULT_RANK_TOL = 1e-12
CACHE_FORMAT = "ridge-mml-design/1"


@dataclass(frozen=True)
class Dataset:
    """Raw response vector and covariate matrix with labels."""

    response: np.ndarray
    covariates: np.ndarray
    column_names: tuple = ()
    response_name: str = "y"

    def __post_init__(self):
        y = np.asarray(self.response, dtype=float).ravel()
        X = np.asarray(self.covariates, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DimensionMismatch(
                f"covariates {X.shape} do not match response length {y.shape[0]}"
            )
        if y.shape[0] < 2:
            raise TooFewRows(f"need at least 2 rows, got {y.shape[0]}")
        if X.shape[1] < 1:
            raise DimensionMismatch("need at least one covariate")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise IoError("dataset contains missing or non-finite values")
        names = tuple(self.column_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DimensionMismatch("column_names length does not match covariates")
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "column_names", names)

    @property
    def rows(self) -> int:
        return self.covariates.shape[0]

    @property
    def columns(self) -> int:
        return self.covariates.shape[1] + 1


@dataclass(frozen=True)
class Standardization:
    """Centering and scaling constants needed to map results back."""

    y_mean: float
    y_scale: float
    x_means: np.ndarray
    x_scales: np.ndarray
    mode: str = UNIT_VARIANCE
    y_scaled: bool = True

    def transform_covariates(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.x_means.shape[0]:
            raise DimensionMismatch(
                f"expected {self.x_means.shape[0]} covariates, got {X.shape[-1]}"
            )
        return (X - self.x_means) / self.x_scales

    def transform_response(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_scale

    def inverse_response(self, y_std) -> np.ndarray:
        return np.asarray(y_std, dtype=float) * self.y_scale + self.y_mean

    @classmethod
    def identity(cls, p: int) -> "Standardization":
        return cls(0.0, 1.0, np.zeros(p), np.ones(p), UNIT_VARIANCE, False)


@dataclass(frozen=True)
class StandardizedDesign:
    """Standardized data together with its thin SVD and canonical OLS fit.

    Attributes
    ----------
    X : ndarray of shape (n, p)
    y : ndarray of shape (n,)
    d : ndarray of shape (q,)
        Retained singular values in decreasing order.
    U : ndarray of shape (n, q)
    W : ndarray of shape (p, q)
    alpha_hat : ndarray of shape (q,)
        OLS coefficients on the principal-component coordinates.
    yty : float
    standardization : Standardization
    column_names : tuple of str
    """

    X: np.ndarray
    y: np.ndarray
    d: np.ndarray
    U: np.ndarray
    W: np.ndarray
    alpha_hat: np.ndarray
    yty: float
    standardization: Standardization
    column_names: tuple = field(default=())

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.d.shape[0]

    @property
    def d2(self) -> np.ndarray:
        return self.d**2

    @property
    def uty(self) -> np.ndarray:
        """Projections of y on the left singular vectors."""
        return self.alpha_hat * self.d

    @classmethod
    def from_arrays(cls, X, y, standardization=None, rank_tol=DEFAULT_RANK_TOL,
                    column_names=()):
        """Decompose an already standardized ``(X, y)`` pair."""
        X = np.ascontiguousarray(X, dtype=float)
        y = np.ascontiguousarray(y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"X {X.shape} incompatible with y {y.shape}")
        U, d, W, q = decompose(X, rank_tol)
        if q == 0:
            raise NumericalFailure("design matrix has no nonzero singular value")
        alpha_hat = canonical_ols(U, d, y)
        if standardization is None:
            standardization = Standardization.identity(X.shape[1])
        names = tuple(column_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        return cls(X, y, d, U, W, alpha_hat, float(y @ y), standardization, names)

    def save(self, path) -> None:
        """Write the design and its decomposition to a binary cache file."""
        s = self.standardization
        with open(path, "wb") as fh:
            np.savez(
                fh,
                format=np.array(CACHE_FORMAT),
                X=self.X, y=self.y, d=self.d, U=self.U, W=self.W,
                alpha_hat=self.alpha_hat, yty=np.array(self.yty),
                y_mean=np.array(s.y_mean), y_scale=np.array(s.y_scale),
                x_means=s.x_means, x_scales=s.x_scales,
                mode=np.array(s.mode), y_scaled=np.array(s.y_scaled),
                column_names=np.array(self.column_names, dtype=str),
            )

    @classmethod
    def load(cls, path) -> "StandardizedDesign":
        """Read a cache file written by :meth:`save`."""
        try:
            with np.load(path, allow_pickle=False) as z:
                tag = str(z["format"])
                if tag != CACHE_FORMAT:
                    raise IoError(f"unsupported cache format {tag!r}")
                s = Standardization(
                    float(z["y_mean"]), float(z["y_scale"]), z["x_means"],
                    z["x_scales"], str(z["mode"]), bool(z["y_scaled"]),
                )
                return cls(
                    z["X"], z["y"], z["d"], z["U"], z["W"], z["alpha_hat"],
                    float(z["yty"]), s, tuple(str(c) for c in z["column_names"]),
                )
        except (OSError, KeyError, ValueError) as exc:
            raise IoError(f"cannot read design cache {path}: {exc}") from exc


def _column_scales(Xc: np.ndarray, mode: str) -> np.ndarray:
    ss = np.sum(Xc**2, axis=0)
    if mode == UNIT_SUM_OF_SQUARES:
        return np.sqrt(ss)
    return np.sqrt(ss / (Xc.shape[0] - 1))


def standardize(dataset: Dataset, mode: str = UNIT_VARIANCE, scale_y: bool = True):
    """Center and scale a dataset.

    Returns the standardized covariates, the standardized response and the
    :class:`Standardization` holding the constants.
    """
    if mode not in _MODES:
        raise ValueError(f"unknown standardization mode {mode!r}")
    X = dataset.covariates
    y = dataset.response
    n = X.shape[0]
    if n < 2:
        raise TooFewRows(f"need at least 2 rows, got {n}")
    x_means = X.mean(axis=0)
    Xc = X - x_means
    x_scales = _column_scales(Xc, mode)
    # relative guard so that columns equal up to rounding count as constant
    tol = 1e-13 * np.maximum(np.abs(x_means), 1.0) * np.sqrt(n)
    for j in np.flatnonzero(x_scales <= tol):
        raise ConstantColumn(int(j), dataset.column_names[j])
    y_mean = float(y.mean())
    yc = y - y_mean
    y_scale = 1.0
    if scale_y:
        y_scale = float(_column_scales(yc[:, None], mode)[0])
        if y_scale <= 0:
            raise ConstantColumn(-1, dataset.response_name)
    s = Standardization(y_mean, y_scale, x_means, x_scales, mode, bool(scale_y))
    return Xc / x_scales, yc / y_scale, s


def prepare_design(dataset: Dataset, mode: str = UNIT_VARIANCE, scale_y: bool = True,
                   rank_tol: float = DEFAULT_RANK_TOL) -> StandardizedDesign:
    """Standardize a dataset and decompose it in one step."""
    Xs, ys, s = standardize(dataset, mode, scale_y)
    return StandardizedDesign.from_arrays(Xs, ys, s, rank_tol, dataset.column_names)


def back_transform(beta_bar, s: Standardization) -> np.ndarray:
    """Convert standardized slopes to an intercept plus original-scale slopes."""
    beta_bar = np.asarray(beta_bar, dtype=float).ravel()
    if beta_bar.shape[0] != s.x_scales.shape[0]:
        raise DimensionMismatch(
            f"coefficient length {beta_bar.shape[0]} != {s.x_scales.shape[0]}"
        )
    slopes = s.y_scale * beta_bar / s.x_scales
    intercept = s.y_mean - slopes @ s.x_means
    return np.concatenate(([intercept], slopes))


def decompose(X, rank_tol: float = DEFAULT_RANK_TOL):
    """Thin SVD keeping singular values above ``rank_tol`` times the largest.

    Returns ``(U, d, W, q)`` with ``X ~= U @ diag(d) @ W.T``.
    """
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise NumericalFailure("design matrix contains non-finite values")
    try:
        U, d, Wt = np.linalg.svd(X, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    if d.size == 0 or d[0] == 0.0:
        return U[:, :0], d[:0], Wt[:0].T, 0
    q = int(np.sum(d > rank_tol * d[0]))
    return U[:, :q], d[:q].copy(), Wt[:q].T.copy(), q


def canonical_ols(U, d, y) -> np.ndarray:
    """OLS coefficients of ``y`` on ``Z = U diag(d)``."""
    U = np.asarray(U, dtype=float)
    d = np.asarray(d, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if U.shape[0] != y.shape[0] or U.shape[1] != d.shape[0]:
        raise DimensionMismatch(f"U {U.shape}, d {d.shape}, y {y.shape} incompatible")
    if np.any(d <= 0):
        raise ZeroSingularValue("singular values must be strictly positive")
    return (U.T @ y) / d


def expand_features(X0, kind: str = "quadratic", knots=None) -> np.ndarray:
    """Quadratic or cubic radial spline basis expansion.

    ``quadratic`` returns the linear terms, their squares and all distinct
    pairwise products. ``cubic_spline`` appends ``||x - knot||^3`` for each
    knot (the rows of ``X0`` by default).
    """
    X0 = np.asarray(X0, dtype=float)
    if X0.ndim == 1:
        X0 = X0[:, None]
    if X0.ndim != 2:
        raise DimensionMismatch("X0 must be a matrix")
    if kind == "quadratic":
        p0 = X0.shape[1]
        rows, cols = np.triu_indices(p0, k=1)
        return np.hstack([X0, X0**2, X0[:, rows] * X0[:, cols]])
    if kind == "cubic_spline":
        K = X0 if knots is None else np.asarray(knots, dtype=float)
        if K.ndim == 1:
            K = K[:, None]
        if K.shape[1] != X0.shape[1]:
            raise DimensionMismatch("knots must have the same number of columns as X0")
        sq = (np.sum(X0**2, axis=1)[:, None] + np.sum(K**2, axis=1)[None, :]
              - 2.0 * X0 @ K.T)
        dist = np.sqrt(np.maximum(sq, 0.0))
        return np.hstack([X0, dist**3])
    raise ValueError(f"unknown expansion kind {kind!r}")


def quadratic_names(names: Sequence[str]) -> tuple:
    names = list(names)
    p0 = len(names)
    rows, cols = np.triu_indices(p0, k=1)
    return tuple(names + [f"{c}^2" for c in names]
                 + [f"{names[i]}*{names[j]}" for i, j in zip(rows, cols)])


def read_csv(path, response=0) -> Dataset:
    """Read a numeric CSV file with a header row.

    ``response`` selects the response column by name or zero-based index;
    every other column becomes a covariate.
    """
    if not os.path.isfile(path):
        raise IoError(f"no such file: {path}")
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise IoError(f"{path} is empty")
            header = [h.strip() for h in header]
            rows = [r for r in reader if r and any(c.strip() for c in r)]
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    idx = _resolve_column(header, response)
    values = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise IoError(f"row {i + 2} has {len(row)} fields, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise IoError(
                    f"non-numeric or missing value {cell!r} at row {i + 2}, "
                    f"column {header[j]!r}"
                ) from None
    keep = [j for j in range(len(header)) if j != idx]
    return Dataset(values[:, idx], values[:, keep],
                   tuple(header[j] for j in keep), header[idx])


def _resolve_column(header, response) -> int:
    if isinstance(response, str):
        if response in header:
            return header.index(response)
        try:
            response = int(response)
        except ValueError:
            raise IoError(f"response column {response!r} not found") from None
    idx = int(response)
    if idx < 0:
        idx += len(header)
    if not 0 <= idx < len(header):
        raise IoError(f"response index {response} out of range")
    return idx


def write_csv(path, dataset: Dataset) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([dataset.response_name, *dataset.column_names])
        for yi, xi in zip(dataset.response, dataset.covariates):
            w.writerow([repr(float(yi)), *(repr(float(v)) for v in xi)])


def load_iris() -> Dataset:
    """Iris: sepal length regressed on the other three measurements."""
    from sklearn.datasets import load_iris as _load

    X = _load().data
    return Dataset(X[:, 0], X[:, 1:],
                   ("sepal_width", "petal_length", "petal_width"), "sepal_length")


_DIABETES_NAMES = ("age", "sex", "bmi", "bp", "s1", "s2", "s3", "s4", "s5", "s6")


def load_diabetes() -> Dataset:
    """Diabetes progression data with its 10 baseline covariates."""
    from sklearn.datasets import load_diabetes as _load

    bunch = _load(scaled=False)
    return Dataset(bunch.target, bunch.data, _DIABETES_NAMES, "progression")


def load_diabetes_quadratic() -> Dataset:
    """Diabetes with linear, squared and pairwise interaction terms (65 columns).

    The baseline covariates are standardized before the products are formed.
    """
    base = load_diabetes()
    Xs, _, _ = standardize(base, UNIT_VARIANCE, scale_y=False)
    return Dataset(base.response, expand_features(Xs, "quadratic"),
                   quadratic_names(base.column_names), base.response_name)


def load_diabetes_spline() -> Dataset:
    """Diabetes quadratic expansion plus one cubic radial spline per row."""
    base = load_diabetes()
    Xs, _, _ = standardize(base, UNIT_VARIANCE, scale_y=False)
    quad = expand_features(Xs, "quadratic")
    spline = expand_features(Xs, "cubic_spline")[:, Xs.shape[1]:]
    names = quadratic_names(base.column_names) + tuple(
        f"spline{i}" for i in range(spline.shape[1]))
    return Dataset(base.response, np.hstack([quad, spline]), names, base.response_name)


BUILTIN_DATASETS = {
    "iris": load_iris,
    "diabetes": load_diabetes,
    "diabetes_q": load_diabetes_quadratic,
    "diabetes_s": load_diabetes_spline,
}


def load_builtin(name: str) -> Dataset:
    try:
        return BUILTIN_DATASETS[name]()
    except KeyError:
        raise IoError(
            f"unknown builtin dataset {name!r}; choose from {sorted(BUILTIN_DATASETS)}"
        ) from None
