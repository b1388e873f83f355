"""Posterior, predictive and diagnostic quantities from the thin SVD.

No p-by-p or n-by-n matrix is ever formed; costs are O(pq) or O(nq).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from . import student
from .core import DEFAULT_A, DEFAULT_B, ShrinkageProfile, _check_hyper
from .data import StandardizedDesign
from .exceptions import DimensionMismatch, LeverageOne, ShapeTooSmall
from .serialize import clean


@dataclass(frozen=True)
class PosteriorSummary:
    """Normal inverse-gamma posterior under a given shrinkage profile.

    Attributes
    ----------
    alpha_bar : ndarray of shape (q,)
        Posterior mean of the canonical coefficients.
    beta_bar : ndarray of shape (p,)
        Posterior mean of the standardized coefficients.
    v_tilde : ndarray of shape (p,)
        Marginal posterior variances of the coefficients.
    a_bar, b_bar : float
        Updated inverse-gamma shape and rate.
    sigma2_mean, sigma2_var : float
        Posterior mean and variance of the error variance (the variance is
        infinite when ``a_bar <= 2``).
    dof : float
        Degrees of freedom of the marginal coefficient posteriors.
    lambdas : ndarray of shape (q,)
        Shrinkage profile the summary was computed with.
    """

    alpha_bar: np.ndarray
    beta_bar: np.ndarray
    v_tilde: np.ndarray
    a_bar: float
    b_bar: float
    sigma2_mean: float
    sigma2_var: float
    dof: float
    lambdas: np.ndarray
    a: float = DEFAULT_A
    b: float = DEFAULT_B


def _lambdas(profile):
    if isinstance(profile, ShrinkageProfile):
        return profile.lambdas
    return np.asarray(profile, dtype=float).ravel()


def posterior_fit(design: StandardizedDesign, profile, a=DEFAULT_A, b=DEFAULT_B):
    """Posterior summary for ``design`` under shrinkage ``profile``."""
    _check_hyper(a, b)
    lam = _lambdas(profile)
    if lam.shape[0] != design.q:
        raise DimensionMismatch(f"profile length {lam.shape[0]} != q = {design.q}")
    d2 = design.d2
    shrink = d2 / (d2 + lam)
    alpha_bar = design.alpha_hat * shrink
    beta_bar = design.W @ alpha_bar
    a_bar = a + design.n / 2.0
    fitted = float(np.sum(design.uty**2 * shrink))
    b_bar = max(b + 0.5 * (design.yty - fitted), b)
    sigma2_mean = b_bar / (a_bar - 1.0)
    sigma2_var = (b_bar**2 / ((a_bar - 1.0) ** 2 * (a_bar - 2.0))
                  if a_bar > 2 else float("inf"))
    v_tilde = sigma2_mean * ((design.W**2) @ (1.0 / (lam + d2)))
    return PosteriorSummary(alpha_bar, beta_bar, v_tilde, a_bar, b_bar, sigma2_mean,
                            sigma2_var, 2.0 * a + design.n, lam.copy(), a, b)


def _quad_form(summary, design, x):
    """x^T V x for each row of x, where V is the scaled posterior covariance."""
    proj = np.atleast_2d(x) @ design.W
    return np.sum(proj**2 / (summary.lambdas + design.d2), axis=1)


def predictive(summary: PosteriorSummary, design: StandardizedDesign, x_new):
    """Posterior predictive Student distribution at standardized ``x_new``.

    Returns ``(mean, variance, dof)``; ``x_new`` may be one row or a matrix
    of rows, in which case mean and variance are arrays.
    """
    if summary.a_bar <= 2:
        raise ShapeTooSmall(f"a_bar = {summary.a_bar} <= 2; predictive variance undefined")
    x = np.asarray(x_new, dtype=float)
    if x.shape[-1] != design.p:
        raise DimensionMismatch(f"x_new has {x.shape[-1]} entries, expected {design.p}")
    mean = np.atleast_2d(x) @ summary.beta_bar
    var = summary.b_bar / (summary.a_bar - 2.0) * (1.0 + _quad_form(summary, design, x))
    if x.ndim == 1:
        return float(mean[0]), float(var[0]), summary.a_bar
    return mean, var, summary.a_bar


@dataclass(frozen=True)
class Diagnostics:
    """Leverages, effective degrees of freedom, fit and residual summaries."""

    hat_diag: np.ndarray
    df: float
    df_variance: float
    df_error: float
    r_squared: float
    std_residuals: np.ndarray

    def to_dict(self) -> dict:
        return clean({
            "df": self.df, "df_variance": self.df_variance, "df_error": self.df_error,
            "r_squared": self.r_squared, "hat_diag": self.hat_diag,
            "std_residuals": self.std_residuals,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "hat_diag", "std_residual"])
        for i, (h, r) in enumerate(zip(self.hat_diag, self.std_residuals)):
            w.writerow(clean([i, h, r]))
        return buf.getvalue()


def effective_df(d2, lambdas):
    s = d2 / (d2 + lambdas)
    return float(np.sum(s)), float(np.sum(s**2))


def diagnostics(summary: PosteriorSummary, design: StandardizedDesign,
                exact_residuals: bool = False) -> Diagnostics:
    """Hat diagonal, df, R-squared and standardized residuals.

    Residuals are divided by the posterior mean error standard deviation; with
    ``exact_residuals`` they are also divided by ``sqrt(1 - h_ii)``.
    """
    lam = summary.lambdas
    d2 = design.d2
    hat = (design.U**2) @ (d2 / (lam + d2))
    df, df_var = effective_df(d2, lam)
    resid = design.y - design.X @ summary.beta_bar
    centered = design.y - design.y.mean()
    tss = float(centered @ centered)
    r2 = 1.0 - float(resid @ resid) / tss if tss > 0 else 0.0
    scale = np.sqrt(summary.sigma2_mean)
    if exact_residuals:
        scale = scale * np.sqrt(np.maximum(1.0 - hat, 1e-300))
    return Diagnostics(hat, df, df_var, 2.0 * df - df_var, r2, resid / scale)


def loo_delta_beta(summary: PosteriorSummary, design: StandardizedDesign, i: int):
    """Change in the posterior mean when observation ``i`` is removed.

    Uses the rank-one update formula with the posterior scale held fixed.
    """
    x = design.X[i]
    proj = design.W.T @ x
    vx = design.W @ (proj / (summary.lambdas + design.d2))
    h = float(x @ vx)
    if 1.0 - h <= 1e-12:
        raise LeverageOne(f"observation {i} has leverage {h}")
    r = float(design.y[i] - x @ summary.beta_bar)
    return vx * (r / (1.0 - h))


@dataclass(frozen=True)
class SignificanceReport:
    """Credible intervals and scaled-neighborhood probabilities per covariate."""

    ci50: np.ndarray
    ci95: np.ndarray
    sn: np.ndarray
    flag_ci50: np.ndarray
    flag_ci95: np.ndarray
    flag_sn: np.ndarray
    ci_score: np.ndarray
    column_names: tuple = ()

    def rows(self):
        names = self.column_names or tuple(f"x{j}" for j in range(len(self.sn)))
        for j, name in enumerate(names):
            yield {
                "covariate": name,
                "ci50_lo": self.ci50[j, 0], "ci50_hi": self.ci50[j, 1],
                "ci95_lo": self.ci95[j, 0], "ci95_hi": self.ci95[j, 1],
                "sn": self.sn[j],
                "flag_ci50": bool(self.flag_ci50[j]),
                "flag_ci95": bool(self.flag_ci95[j]),
                "flag_sn": bool(self.flag_sn[j]),
            }

    def to_json(self) -> str:
        return json.dumps(clean(list(self.rows())), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        rows = list(self.rows())
        w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else ["covariate"],
                           lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(clean(row))
        return buf.getvalue()


def significance(summary: PosteriorSummary, levels=(0.5, 0.95),
                 column_names=()) -> SignificanceReport:
    """Interval and scaled-neighborhood significance criteria.

    Intervals are ``beta_bar + sqrt(v_tilde) * t_q`` with Student quantiles on
    ``2a + n`` degrees of freedom. The scaled-neighborhood value is the
    posterior probability of ``|beta_k| <= sqrt(v_tilde_k)``; values below
    one half flag the covariate. ``ci_score`` is the Student cdf of
    ``|beta_bar| / sqrt(v_tilde)``, a ranking score that grows with evidence
    against zero.
    """
    lo_level, hi_level = sorted(levels)
    sd = np.sqrt(summary.v_tilde)
    z = summary.beta_bar / sd

    def interval(level):
        tq = student.quantile(0.5 + level / 2.0, summary.dof)
        return np.column_stack([summary.beta_bar - tq * sd, summary.beta_bar + tq * sd])

    ci_lo = interval(lo_level)
    ci_hi = interval(hi_level)
    sn = significance_sn(z, summary.dof)
    excludes_zero = lambda ci: (ci[:, 0] > 0) | (ci[:, 1] < 0)  # noqa: E731
    return SignificanceReport(
        ci_lo, ci_hi, sn, excludes_zero(ci_lo), excludes_zero(ci_hi), sn < 0.5,
        student.cdf(np.abs(z), summary.dof), tuple(column_names),
    )


def significance_sn(z, dof):
    """Probability mass of a unit-scale Student centered at ``z`` within [-1, 1]."""
    z = np.abs(np.asarray(z, dtype=float))
    # symmetric form: cdf(1 - z) - cdf(-1 - z) == cdf(1 - z) + cdf(1 + z) - 1
    out = student.cdf(1.0 - z, dof) - student.cdf(-1.0 - z, dof)
    return np.clip(out, 0.0, 1.0)


def class_probability(summary: PosteriorSummary, design: StandardizedDesign, x_new,
                      y_offset: float = 0.0):
    """Predictive probability that a +/-1 coded response is positive."""
    mean, var, dof = predictive(summary, design, x_new)
    return student.cdf((np.asarray(mean) + y_offset) / np.sqrt(var), dof)


def theoretical_error(profile, d, alpha_true, sigma2: float, W=None):
    """Bias vector and total mean squared error of the ridge posterior mean.

    Returns ``(bias, mse)``; ``bias`` is on the coefficient scale when ``W``
    is given and on the canonical scale otherwise.
    """
    lam = _lambdas(profile)
    d2 = np.asarray(d, dtype=float) ** 2
    alpha = np.asarray(alpha_true, dtype=float)
    denom = d2 + lam
    bias_c = -lam * alpha / denom
    mse = float(np.sum((d2 * sigma2 + lam**2 * alpha**2) / denom**2))
    bias = bias_c if W is None else np.asarray(W) @ bias_c
    return bias, mse
