"""Standard Student t distribution: density, cdf and quantile."""

from __future__ import annotations

from math import lgamma, log, pi

import numpy as np
from scipy.special import betainc

from .exceptions import DomainError


def _check_dof(dof):
    if not np.all(np.asarray(dof) > 0):
        raise DomainError(f"degrees of freedom must be positive, got {dof}")


def pdf(t, dof):
    _check_dof(dof)
    t = np.asarray(t, dtype=float)
    c = lgamma((dof + 1) / 2) - lgamma(dof / 2) - 0.5 * log(dof * pi)
    out = np.exp(c - (dof + 1) / 2 * np.log1p(t * t / dof))
    return float(out) if out.ndim == 0 else out


def cdf(t, dof):
    """Cumulative distribution function via the regularized incomplete beta.

    The tail form is used for large ``|t|`` and the central form near zero so
    that both tails keep full relative accuracy.
    """
    _check_dof(dof)
    t = np.asarray(t, dtype=float)
    if np.any(np.isnan(t)):
        raise DomainError("cdf argument is NaN")
    t2 = t * t
    with np.errstate(invalid="ignore", divide="ignore"):
        x = dof / (dof + t2)
        tail = 0.5 * betainc(0.5 * dof, 0.5, x)
        central = 0.5 * betainc(0.5, 0.5 * dof, t2 / (dof + t2))
    tail = np.where(np.isinf(t), 0.0, tail)
    upper = np.where(x < 0.5, 1.0 - tail, 0.5 + central)
    lower = np.where(x < 0.5, tail, 0.5 - central)
    out = np.where(t >= 0, upper, lower)
    return float(out) if out.ndim == 0 else out


def _quantile_scalar(u: float, dof: float) -> float:
    if u == 0.5:
        return 0.0
    lo, hi = -1.0, 1.0
    while cdf(lo, dof) > u:
        lo *= 2.0
    while cdf(hi, dof) < u:
        hi *= 2.0
    # bisection until the bracket is narrow, then Newton steps guarded by it
    for _ in range(200):
        if hi - lo <= 1e-3 * max(1.0, abs(lo), abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if cdf(mid, dof) < u:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    for _ in range(50):
        f = cdf(t, dof) - u
        if f < 0:
            lo = t
        elif f > 0:
            hi = t
        else:
            break
        dens = pdf(t, dof)
        step = f / dens if dens > 0 else 0.0
        nxt = t - step
        if not lo <= nxt <= hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - t) <= 1e-15 * max(1.0, abs(t)):
            t = nxt
            break
        t = nxt
    return t


def quantile(u, dof):
    """Inverse cdf by bracketing, bisection and safeguarded Newton steps."""
    _check_dof(dof)
    u_arr = np.asarray(u, dtype=float)
    if np.any(~((u_arr > 0) & (u_arr < 1))):
        raise DomainError(f"quantile level must lie in (0, 1), got {u}")
    if u_arr.ndim == 0:
        return _quantile_scalar(float(u_arr), float(dof))
    return np.array([_quantile_scalar(float(v), float(dof)) for v in u_arr.ravel()]
                    ).reshape(u_arr.shape)


def student_dist(kind: str, arg, dof):
    """Dispatch helper: ``kind`` is ``"cdf"`` or ``"quantile"``."""
    if kind == "cdf":
        return cdf(arg, dof)
    if kind == "quantile":
        return quantile(arg, dof)
    raise DomainError(f"unknown kind {kind!r}")

