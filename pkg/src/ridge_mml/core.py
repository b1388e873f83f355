"""Marginal likelihood evaluation and MML shrinkage estimation.

Every quantity is computed from the thin SVD of the standardized design, so
the cost per objective evaluation is O(q).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import lgamma, log, pi

import numpy as np
from scipy.optimize import minimize_scalar

from .data import StandardizedDesign
from .exceptions import DegenerateFit, DimensionMismatch, NonPositiveHyperparameter

RR, PRR, GRR = "rr", "prr", "grr"
FAMILIES = (RR, PRR, GRR)

DEFAULT_A = 1e-3
DEFAULT_B = 1e-3
LAMBDA_MAX = 1e10
GRID_STEP = 0.25
XATOL = 1e-6
PRR_TOL = 1e-4
DELTA_BOUNDS = (-3.0, 3.0)
DELTA_BOUNDS_WIDE = (-10.0, 10.0)
# beyond this value the quarter-step scan continues with doubling steps
LINEAR_SCAN_LIMIT = 1e5


@dataclass(frozen=True)
class RidgeSpec:
    """Model family, its shrinkage parameter(s) and the inverse-gamma prior.

    ``lam`` is a scalar for ``rr``/``prr`` and a length-q vector for ``grr``.
    For ``prr`` the per-component precision is ``lam / d_k**(2*delta)``, so
    ``delta = 0`` is ordinary ridge and ``delta = -1`` shrinks every OLS
    coefficient by ``1 / (1 + lam)``.
    """

    family: str = RR
    lam: object = 1.0
    delta: float = 0.0
    a: float = DEFAULT_A
    b: float = DEFAULT_B
    lambda_max: float = LAMBDA_MAX

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == GRR:
            lam = np.asarray(self.lam, dtype=float).ravel()
            if np.any(lam < 0):
                raise ValueError("shrinkage values must be non-negative")
            object.__setattr__(self, "lam", lam)
        else:
            lam = float(self.lam)
            if lam < 0:
                raise ValueError("shrinkage value must be non-negative")
            object.__setattr__(self, "lam", lam)
        _check_hyper(self.a, self.b)

    @classmethod
    def rr(cls, lam, **kw):
        return cls(RR, lam, 0.0, **kw)

    @classmethod
    def prr(cls, lam, delta, **kw):
        return cls(PRR, lam, delta, **kw)

    @classmethod
    def grr(cls, lams, **kw):
        return cls(GRR, lams, 0.0, **kw)


@dataclass(frozen=True)
class ShrinkageProfile:
    """Per-component shrinkage values (one per retained singular value)."""

    lambdas: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lambdas", np.asarray(self.lambdas, dtype=float).ravel())

    @property
    def q(self) -> int:
        return self.lambdas.shape[0]

    @classmethod
    def constant(cls, lam, q):
        return cls(np.full(q, float(lam)))


@dataclass(frozen=True)
class MmlFit:
    """Result of a marginal-likelihood maximization."""

    spec: RidgeSpec
    profile: ShrinkageProfile
    log_ml: float
    objective_evals: int
    converged: bool
    message: str = ""
    iterations: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def lambda_hat(self):
        return self.spec.lam

    @property
    def delta_hat(self) -> float:
        return self.spec.delta


def _check_hyper(a, b):
    if not (a > 0 and b > 0):
        raise NonPositiveHyperparameter(f"a and b must be positive, got a={a}, b={b}")


def lambda_vector(spec: RidgeSpec, d) -> ShrinkageProfile:
    """Map a model specification to per-component shrinkage values."""
    d = np.asarray(d, dtype=float).ravel()
    q = d.shape[0]
    if spec.family == RR:
        lam = np.full(q, spec.lam)
    elif spec.family == PRR:
        with np.errstate(over="ignore"):
            lam = spec.lam * np.exp(-2.0 * spec.delta * np.log(d))
    else:
        lam = spec.lam
        if lam.shape[0] != q:
            raise DimensionMismatch(f"GRR vector has length {lam.shape[0]}, need {q}")
    return ShrinkageProfile(np.clip(lam, 0.0, spec.lambda_max))


def _fitted_ss(design: StandardizedDesign, lambdas) -> np.ndarray:
    """sum_k alpha_hat_k^2 d_k^4 / (lambda_k + d_k^2) along the last axis."""
    d2 = design.d2
    c = design.uty**2
    return np.sum(c * d2 / (lambdas + d2), axis=-1)


def _log_ratio(design, lambdas):
    """sum_k log(lambda_k / (lambda_k + d_k^2)); -inf when any lambda_k is 0."""
    with np.errstate(divide="ignore"):
        return -np.sum(np.log1p(design.d2 / lambdas), axis=-1)


def log_marginal(design: StandardizedDesign, profile, a=DEFAULT_A, b=DEFAULT_B):
    """Log marginal likelihood of the normal inverse-gamma ridge model.

    Parameters
    ----------
    design : StandardizedDesign
    profile : ShrinkageProfile or array_like
        Per-component shrinkage values. A 2-D array evaluates one profile
        per row.
    a, b : float
        Shape and rate of the inverse-gamma prior on the error variance.

    Returns
    -------
    float or ndarray
        ``-inf`` wherever some shrinkage value is zero.
    """
    _check_hyper(a, b)
    lambdas = profile.lambdas if isinstance(profile, ShrinkageProfile) else \
        np.asarray(profile, dtype=float)
    if lambdas.shape[-1] != design.q:
        raise DimensionMismatch(f"profile length {lambdas.shape[-1]} != q = {design.q}")
    n = design.n
    a_bar = a + n / 2.0
    b_bar = b + 0.5 * (design.yty - _fitted_ss(design, lambdas))
    b_bar = np.maximum(b_bar, b)
    const = a * log(b) + lgamma(a_bar) - lgamma(a) - 0.5 * n * log(pi)
    out = 0.5 * _log_ratio(design, lambdas) - a_bar * np.log(b_bar) + const
    return float(out) if np.ndim(out) == 0 else out


def reduced_objective(design: StandardizedDesign, lambdas):
    """Shrinkage-dependent part of twice the log marginal likelihood with a = b = 0.

    Raises
    ------
    DegenerateFit
        If the residual term is not positive (the design interpolates y).
    """
    lambdas = np.asarray(lambdas, dtype=float)
    resid = design.yty - _fitted_ss(design, lambdas)
    if np.any(resid <= 0):
        raise DegenerateFit("residual sum of squares is not positive")
    return _log_ratio(design, lambdas) - design.n * np.log(resid)


def rr_objective(design: StandardizedDesign, lam):
    """Reduced ridge objective for scalar or array ``lam`` (0 gives -inf)."""
    lam = np.asarray(lam, dtype=float)
    out = reduced_objective(design, lam[..., None] * np.ones(design.q))
    return float(out) if out.ndim == 0 else out


def grr_phi(design: StandardizedDesign, k: int, lam_k):
    """Separable per-component objective whose maximizer is the GRR estimate."""
    d2 = design.d2[k]
    c = design.uty[k] ** 2
    lam_k = np.asarray(lam_k, dtype=float)
    with np.errstate(divide="ignore"):
        out = (np.log(lam_k) - np.log(lam_k + d2)
               - design.n * np.log(design.yty - c * d2 / (lam_k + d2)))
    return float(out) if out.ndim == 0 else out


def is_interpolating(design: StandardizedDesign, rtol=1e-10) -> bool:
    """True when the OLS fit leaves (numerically) no residual."""
    return design.yty - float(np.sum(design.uty**2)) <= rtol * design.yty


class _Objective:
    """Counts evaluations of the profile objective used for maximization.

    Uses the reduced objective unless the design interpolates the response,
    in which case the full log marginal with b > 0 is maximized.
    """

    def __init__(self, design, to_profile, a, b):
        self.design = design
        self.to_profile = to_profile
        self.evals = 0
        self.full = is_interpolating(design)
        self.a = a
        self.b = max(b, DEFAULT_B)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        self.evals += int(x.size)
        lambdas = self.to_profile(x)
        if not self.full:
            try:
                return reduced_objective(self.design, lambdas)
            except DegenerateFit:
                self.full = True
        return log_marginal(self.design, lambdas, self.a, self.b)


def _bounded_max(f, lo, hi):
    res = minimize_scalar(lambda t: -float(f(t)), bounds=(lo, hi), method="bounded",
                          options={"xatol": XATOL})
    return float(res.x), -float(res.fun)


def _scan_and_refine(f, lambda_max):
    """Quarter-step scan up to the first decrease, then bounded refinement.

    Returns ``(lam_hat, value, bracketed)``.
    """
    prev_val = -np.inf
    k0 = 0
    block = 32
    kstar = None
    while k0 * GRID_STEP < LINEAR_SCAN_LIMIT:
        ks = np.arange(k0 + 1, k0 + 1 + block)
        vals = f(ks * GRID_STEP)
        seq = np.concatenate(([prev_val], vals))
        dec = np.flatnonzero(np.diff(seq) < 0)
        if dec.size:
            kstar = k0 + int(dec[0]) + 1
            break
        prev_val = vals[-1]
        k0 += block
        block = min(block * 2, 8192)
    if kstar is not None:
        # the maximum lies between k*-2 and k*; one extra step is kept on the right
        lo = max(0.0, (kstar - 2) * GRID_STEP)
        hi = (kstar + 1) * GRID_STEP
        grid_best = (kstar - 1) * GRID_STEP
    else:
        lam_prev, lam = k0 * GRID_STEP / 2.0, k0 * GRID_STEP
        prev = float(f(lam))
        while True:
            nxt = min(2.0 * lam, lambda_max)
            val = float(f(nxt))
            if val < prev:
                lo, hi, grid_best = lam_prev, nxt, lam
                break
            if nxt >= lambda_max:
                return lambda_max, val, False
            lam_prev, lam, prev = lam, nxt, val
    lam_hat, val = _bounded_max(f, lo, hi)
    best_val = float(f(grid_best)) if grid_best > 0 else -np.inf
    if best_val > val:
        lam_hat, val = grid_best, best_val
    return min(lam_hat, lambda_max), val, True


def estimate_rr(design: StandardizedDesign, a=DEFAULT_A, b=DEFAULT_B,
                lambda_max=LAMBDA_MAX) -> MmlFit:
    """MML estimate of the single ridge shrinkage parameter."""
    _check_hyper(a, b)
    obj = _Objective(design, lambda x: np.asarray(x)[..., None] * np.ones(design.q), a, b)
    lam, _, ok = _scan_and_refine(obj, lambda_max)
    spec = RidgeSpec.rr(lam, a=a, b=b, lambda_max=lambda_max)
    profile = lambda_vector(spec, design.d)
    msg = "" if ok else "NoBracket: objective still increasing at lambda_max"
    return MmlFit(spec, profile, log_marginal(design, profile, a, b), obj.evals, ok, msg)


def estimate_prr(design: StandardizedDesign, a=DEFAULT_A, b=DEFAULT_B,
                 lambda_max=LAMBDA_MAX, tol=PRR_TOL, max_iter=100,
                 extrapolate=True) -> MmlFit:
    """MML estimate of the power ridge parameters by alternating 1-D searches.

    Each cycle maximizes over ``lam`` with ``delta`` fixed (quarter-step scan
    plus bounded refinement) and then over ``delta`` with ``lam`` fixed.
    Cycles stop once the log marginal likelihood improves by less than
    ``tol``. With ``extrapolate`` the displacement of each cycle is also
    followed by a bounded line search in ``(log lam, delta)``, which removes
    the slow zig-zag of plain coordinate ascent along curved ridges.
    """
    _check_hyper(a, b)
    logd = np.log(design.d)
    obj = _Objective(design, lambda lams: lams, a, b)

    def profile_of(lam, delta):
        with np.errstate(over="ignore"):
            return np.clip(np.asarray(lam, dtype=float)[..., None]
                           * np.exp(-2.0 * delta * logd), 0.0, lambda_max)

    def lml(lam, delta):
        return log_marginal(design, profile_of(lam, delta), a, b)

    delta = 0.0
    bounds = DELTA_BOUNDS
    widened = False
    lam, best, prev_point = 0.0, -np.inf, None
    converged, msg, it = False, "", 0
    for it in range(1, max_iter + 1):
        lam, _, ok = _scan_and_refine(lambda x: obj(profile_of(x, delta)), lambda_max)
        if not ok:
            msg = "NoBracket: objective still increasing at lambda_max"

        def f_delta(dl, lam=lam):
            return obj(profile_of(lam, dl))

        delta, _ = _bounded_max(f_delta, *bounds)
        if not widened and min(delta - bounds[0], bounds[1] - delta) < 1e-3:
            widened = True
            bounds = DELTA_BOUNDS_WIDE
            delta, _ = _bounded_max(f_delta, *bounds)
        if extrapolate and prev_point is not None and lam > 0:
            lam, delta = _extrapolate(obj, profile_of, prev_point, (lam, delta),
                                      bounds, lambda_max)
        val = lml(lam, delta)
        if val - best < tol:
            converged = ok
            break
        best = val
        prev_point = (lam, delta)
    else:
        msg = msg or f"MaxIterations: no convergence after {max_iter} cycles"
    spec = RidgeSpec.prr(lam, delta, a=a, b=b, lambda_max=lambda_max)
    profile = lambda_vector(spec, design.d)
    return MmlFit(spec, profile, log_marginal(design, profile, a, b), obj.evals,
                  converged, msg, it)


def _extrapolate(obj, profile_of, old, new, bounds, lambda_max, max_step=20.0):
    """Line search along the last cycle's move; returns the better point."""
    if old[0] <= 0:
        return new
    x0 = np.array([log(new[0]), new[1]])
    v = x0 - np.array([log(old[0]), old[1]])
    if not np.any(v):
        return new

    def point(s):
        x = x0 + s * v
        return min(np.exp(x[0]), lambda_max), float(np.clip(x[1], *bounds))

    def g(s):
        return obj(profile_of(*point(s)))

    s, val = _bounded_max(g, 0.0, max_step)
    return point(s) if val > g(0.0) else new


def grr_closed_form(d2, uty2, yty, n, lambda_max=LAMBDA_MAX) -> np.ndarray:
    """Per-component maximizers of the separable GRR objective.

    ``uty2`` holds the squared projections ``(U^T y)_k^2 = d_k^2 alpha_hat_k^2``.
    """
    d2 = np.asarray(d2, dtype=float)
    uty2 = np.asarray(uty2, dtype=float)
    num = d2 * (yty - uty2)
    den = n * uty2 - yty
    out = np.full(d2.shape, float(lambda_max))
    ok = (den > 0) & (num > 0)
    out[ok] = np.minimum(num[ok] / den[ok], lambda_max)
    return out


def estimate_grr(design: StandardizedDesign, a=DEFAULT_A, b=DEFAULT_B,
                 lambda_max=LAMBDA_MAX) -> MmlFit:
    """Closed-form MML estimate of one shrinkage value per component."""
    _check_hyper(a, b)
    lam = grr_closed_form(design.d2, design.uty**2, design.yty, design.n, lambda_max)
    spec = RidgeSpec.grr(lam, a=a, b=b, lambda_max=lambda_max)
    profile = ShrinkageProfile(lam)
    return MmlFit(spec, profile, log_marginal(design, profile, a, b), design.q, True)


def fit_mml(design: StandardizedDesign, family: str = RR, a=DEFAULT_A, b=DEFAULT_B,
            lambda_max=LAMBDA_MAX) -> MmlFit:
    """Dispatch to the estimator for ``family``."""
    fn = {RR: estimate_rr, PRR: estimate_prr, GRR: estimate_grr}.get(family)
    if fn is None:
        raise ValueError(f"unknown family {family!r}")
    return fn(design, a=a, b=b, lambda_max=lambda_max)

