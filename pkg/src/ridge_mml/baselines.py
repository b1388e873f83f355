"""Competing shrinkage selectors and a Gibbs sampler for Bayesian ridge."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from math import lgamma, log, pi

import numpy as np

from . import rng as rng_mod
from .data import StandardizedDesign, decompose
from .exceptions import (
    EmptyGrid,
    NonPositiveHyperparameter,
    SingularDesign,
    TooFewRows,
)
from .parallel import pmap
from .serialize import clean

GCV, BIC, AIC, CV10 = "GCV", "BIC", "AIC", "CV10"


@dataclass(frozen=True)
class GridSpec:
    """Evenly spaced grid ``start, start + step, ..., stop``."""

    start: float = 0.0
    stop: float = 500.0
    step: float = 0.005

    def values(self) -> np.ndarray:
        if self.step <= 0 or self.stop < self.start:
            raise EmptyGrid(f"invalid grid {self}")
        count = int(np.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(count)


@dataclass(frozen=True)
class SelectionTrace:
    """Criterion values over a grid of trial shrinkage values."""

    grid: np.ndarray
    criterion: np.ndarray
    chosen: float
    criterion_name: str
    se: np.ndarray | None = None

    @property
    def chosen_index(self) -> int:
        return int(np.argmin(self.criterion))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["lambda", self.criterion_name.lower()]
        if self.se is not None:
            header.append("se")
        w.writerow(header)
        for i, (g, c) in enumerate(zip(self.grid, self.criterion)):
            row = [g, c] + ([self.se[i]] if self.se is not None else [])
            w.writerow(clean(row))
        return buf.getvalue()


def _rss_df(design: StandardizedDesign, grid, chunk=4096):
    """Residual sum of squares and effective df for each grid value, O(q) each."""
    grid = np.asarray(grid, dtype=float)
    c = design.uty**2
    d2 = design.d2
    rss = np.empty(grid.shape[0])
    df = np.empty(grid.shape[0])
    for lo in range(0, grid.shape[0], chunk):
        g = grid[lo:lo + chunk, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(g > 0, d2 / (d2 + g), 1.0)
        rss[lo:lo + chunk] = design.yty - (s * (2.0 - s)) @ c
        df[lo:lo + chunk] = s.sum(axis=1)
    return np.maximum(rss, 0.0), df


def _as_grid(grid):
    if grid is None:
        grid = GridSpec()
    values = grid.values() if isinstance(grid, GridSpec) else np.asarray(grid, dtype=float)
    if values.size == 0:
        raise EmptyGrid("grid is empty")
    return values


def gcv_select(design: StandardizedDesign, grid=None) -> SelectionTrace:
    """Generalized cross-validation over ``grid`` (default 0 to 500 by 0.005).

    Grid points whose effective df equals n are skipped.
    """
    values = _as_grid(grid)
    rss, df = _rss_df(design, values)
    n = design.n
    keep = np.abs(n - df) > 1e-10 * n
    if not np.any(keep):
        raise EmptyGrid("every grid point has df = n")
    values, rss, df = values[keep], rss[keep], df[keep]
    crit = rss / (n * (1.0 - df / n) ** 2)
    return SelectionTrace(values, crit, float(values[np.argmin(crit)]), GCV)


def ic_select(design: StandardizedDesign, criterion: str = BIC, grid=None) -> SelectionTrace:
    """BIC or AIC: ``(RSS + penalty * df) / n`` with penalty log(n) or 2."""
    criterion = criterion.upper()
    if criterion not in (BIC, AIC):
        raise ValueError(f"criterion must be BIC or AIC, got {criterion!r}")
    values = _as_grid(grid)
    rss, df = _rss_df(design, values)
    n = design.n
    penalty = log(n) if criterion == BIC else 2.0
    crit = (rss + penalty * df) / n
    return SelectionTrace(values, crit, float(values[np.argmin(crit)]), criterion)


def hkb_classic(design: StandardizedDesign) -> float:
    """Plug-in estimate p * sigma_hat^2 / ||beta_ols||^2."""
    n, p, q = design.n, design.p, design.q
    if q < p or n <= p:
        raise SingularDesign(f"OLS needs n > p and full column rank (n={n}, p={p}, q={q})")
    rss = design.yty - float(np.sum(design.uty**2))
    sigma2 = max(rss, 0.0) / (n - p)
    return p * sigma2 / float(np.sum(design.alpha_hat**2))


def hkb_extended(design: StandardizedDesign, return_rank: bool = False):
    """Plug-in estimate built on principal-components regression with r components.

    For each ``r`` the candidate is ``r * s_r^2 / ||alpha_hat[:r]||^2`` with
    ``s_r^2`` the residual variance of the r-component fit. The chosen ``r``
    minimizes ``|r - sum_k d_k^4 / (d_k^2 + lambda_r)^2|`` (smaller r on ties).
    """
    n, q = design.n, design.q
    r_max = min(q, n - 1)
    if r_max < 1:
        raise TooFewRows("need at least two rows")
    r = np.arange(1, r_max + 1)
    cum_fit = np.cumsum(design.uty**2)[:r_max]
    cum_alpha = np.cumsum(design.alpha_hat**2)[:r_max]
    sigma2 = np.maximum(design.yty - cum_fit, 0.0) / (n - r)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(cum_alpha > 0, r * sigma2 / cum_alpha, np.inf)
    d4 = design.d2**2
    with np.errstate(invalid="ignore"):
        dfv = np.where(np.isinf(lam), 0.0,
                       np.sum(d4 / (design.d2 + lam[:, None]) ** 2, axis=1))
    crit = np.abs(r - dfv)
    best = int(np.argmin(crit))
    if return_rank:
        return float(lam[best]), best + 1
    return float(lam[best])


def _fold_indices(n: int, seed: int, k: int = 10):
    perm = rng_mod.stream(seed, rng_mod.FOLDS).permutation(n)
    return np.array_split(perm, k)


def cv_folds(n: int, seed: int = 0, k: int = 10):
    """Seeded near-equal folds (leave-one-out when n < k)."""
    if n < 3:
        raise TooFewRows(f"cross-validation needs at least 3 rows, got {n}")
    return _fold_indices(n, seed, min(k, n))


def _fold_errors(design, folds, profiles_for):
    """Per-fold mean squared prediction errors, one column per profile.

    ``profiles_for(d)`` returns a (G, q_fold) array of shrinkage values for
    the fold's singular values.
    """
    X, y = design.X, design.y
    n = design.n

    def one(test):
        train = np.setdiff1d(np.arange(n), test, assume_unique=True)
        U, d, W, _ = decompose(X[train])
        uty = U.T @ y[train]
        lam = profiles_for(d)
        coef = (d * uty)[None, :] / (d**2 + lam)
        pred = (X[test] @ W) @ coef.T
        return np.mean((y[test][:, None] - pred) ** 2, axis=0)

    return np.vstack(pmap(one, folds))


def _cv_summary(errors):
    k = errors.shape[0]
    cv = errors.mean(axis=0)
    se = errors.std(axis=0, ddof=1) / np.sqrt(k) if k > 1 else np.zeros_like(cv)
    return cv, se


def cv_lambda_max(design: StandardizedDesign, rel=1e-4) -> float:
    """Smallest power of ten at which every coefficient is below ``rel`` of OLS."""
    ref = np.max(np.abs(design.W @ design.alpha_hat))
    d2 = design.d2
    for j in range(-4, 21):
        lam = 10.0**j
        beta = design.W @ (design.alpha_hat * d2 / (d2 + lam))
        if np.max(np.abs(beta)) < rel * ref:
            return lam
    return 1e20


def cv10_select(design: StandardizedDesign, n_grid: int = 100, seed: int = 0,
                k: int = 10, ratio: float = 1e-8) -> SelectionTrace:
    """K-fold cross-validated prediction error over a log-spaced grid.

    The grid holds ``n_grid`` values log-spaced on ``(ratio * lmax, lmax]``
    plus zero, where ``lmax`` comes from :func:`cv_lambda_max`.
    """
    folds = cv_folds(design.n, seed, k)
    lmax = cv_lambda_max(design)
    grid = np.concatenate(([0.0], lmax * ratio ** (1.0 - np.arange(1, n_grid + 1) / n_grid)))
    errors = _fold_errors(design, folds,
                          lambda d: np.broadcast_to(grid[:, None], (grid.size, d.size)))
    cv, se = _cv_summary(errors)
    return SelectionTrace(grid, cv, float(grid[np.argmin(cv)]), CV10, se)


def cv_score(design: StandardizedDesign, profile_for, seed: int = 0, k: int = 10):
    """Cross-validated error and its standard error for one shrinkage rule.

    ``profile_for(d)`` maps a fold's singular values to shrinkage values.
    """
    folds = cv_folds(design.n, seed, k)
    errors = _fold_errors(design, folds, lambda d: np.atleast_2d(profile_for(d)))
    cv, se = _cv_summary(errors)
    return float(cv[0]), float(se[0])


@dataclass(frozen=True)
class GibbsResult:
    """Posterior summaries from the retained Gibbs draws."""

    beta_mean: np.ndarray
    beta_var: np.ndarray
    sigma2_mean: float
    sigma2_var: float
    lambda_mean: float
    lambda_var: float
    iterations: int
    burn_in: int
    seed: int
    samples: dict = field(default_factory=dict)

    @property
    def retained(self) -> int:
        return self.iterations - self.burn_in


def gibbs_rr(design: StandardizedDesign, a=1e-3, b=1e-3, a_lambda=1e-3, b_lambda=1e-3,
             iterations: int = 110_000, burn_in: int = 10_000, seed: int = 0,
             fixed_lambda: float | None = None, init_lambda: float = 1.0,
             keep_samples: bool = False, block: int = 1024) -> GibbsResult:
    """Gibbs sampler for ridge regression with a gamma prior on the shrinkage.

    Each sweep draws the error variance from its inverse-gamma conditional
    given the shrinkage (with the coefficients integrated out), then the
    canonical coefficients from their normal conditional, then the shrinkage
    from its gamma conditional. With ``fixed_lambda`` the shrinkage is held
    at that value.
    """
    if min(a, b, a_lambda, b_lambda) <= 0:
        raise NonPositiveHyperparameter("all hyperparameters must be positive")
    if not iterations > burn_in >= 0:
        raise ValueError("need iterations > burn_in >= 0")
    gen = rng_mod.stream(seed, rng_mod.GIBBS)
    n, p, q = design.n, design.p, design.q
    d2 = design.d2
    c = design.uty**2
    alpha_hat = design.alpha_hat
    a_bar = a + n / 2.0
    shape_lam = a_lambda + p / 2.0
    lam = float(fixed_lambda if fixed_lambda is not None else init_lambda)

    kept = iterations - burn_in
    alphas = np.empty((min(block, iterations), q))
    sig_kept = np.empty(kept)
    lam_kept = np.empty(kept)
    beta_sum = np.zeros(p)
    beta_sq = np.zeros(p)
    beta_samples = np.empty((kept, p)) if keep_samples else None

    def flush(rows, start_kept):
        nonlocal beta_sum, beta_sq
        betas = rows @ design.W.T
        beta_sum += betas.sum(axis=0)
        beta_sq += np.einsum("ij,ij->j", betas, betas)
        if beta_samples is not None:
            beta_samples[start_kept:start_kept + rows.shape[0]] = betas

    it = 0
    n_kept = 0
    null_var_sum = 0.0
    while it < iterations:
        m = min(block, iterations - it)
        z = gen.standard_normal((m, q))
        g_sigma = gen.standard_gamma(a_bar, m)
        g_lam = gen.standard_gamma(shape_lam, m)
        # squared norm of the coefficient part outside the row space of X
        chi_null = gen.chisquare(p - q, m) if p > q else np.zeros(m)
        n_buf = 0
        buf_start = n_kept
        for j in range(m):
            s = d2 / (d2 + lam)
            b_bar = b + 0.5 * (design.yty - float(c @ s))
            sigma2 = b_bar / g_sigma[j]
            alpha = alpha_hat * s + np.sqrt(sigma2 / (lam + d2)) * z[j]
            null_scale = sigma2 / lam
            if fixed_lambda is None:
                beta_sq_norm = float(alpha @ alpha) + null_scale * chi_null[j]
                lam = g_lam[j] / (b_lambda + beta_sq_norm / (2.0 * sigma2))
            if it + j >= burn_in:
                null_var_sum += null_scale
                alphas[n_buf] = alpha
                sig_kept[n_kept] = sigma2
                lam_kept[n_kept] = lam
                n_buf += 1
                n_kept += 1
        if n_buf:
            flush(alphas[:n_buf], buf_start)
        it += m

    beta_mean = beta_sum / kept
    beta_var = np.maximum(beta_sq / kept - beta_mean**2, 0.0) * kept / max(kept - 1, 1)
    if p > q:
        # the null-space part has mean zero and conditional variance sigma2 / lambda
        leak = np.maximum(1.0 - np.sum(design.W**2, axis=1), 0.0)
        beta_var = beta_var + leak * null_var_sum / kept
    samples = {}
    if keep_samples:
        samples = {"beta": beta_samples, "sigma2": sig_kept, "lambda": lam_kept}
    return GibbsResult(
        beta_mean, beta_var, float(sig_kept.mean()), float(sig_kept.var(ddof=1)),
        float(lam_kept.mean()), float(lam_kept.var(ddof=1)), iterations, burn_in,
        int(seed), samples,
    )


def gibbs_log_joint(design: StandardizedDesign, beta, sigma2, lam, a=1e-3, b=1e-3,
                    a_lambda=1e-3, b_lambda=1e-3) -> float:
    """Log joint density of (y, beta, sigma2, lambda) under the sampler's model."""
    n, p = design.n, design.p
    resid = design.y - design.X @ beta
    ll = -0.5 * n * log(2 * pi * sigma2) - 0.5 * float(resid @ resid) / sigma2
    lp_beta = -0.5 * p * log(2 * pi * sigma2 / lam) - 0.5 * lam * float(beta @ beta) / sigma2
    lp_sigma = a * log(b) - lgamma(a) - (a + 1) * log(sigma2) - b / sigma2
    lp_lam = a_lambda * log(b_lambda) - lgamma(a_lambda) + (a_lambda - 1) * log(lam) \
        - b_lambda * lam
    return ll + lp_beta + lp_sigma + lp_lam
