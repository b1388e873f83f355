"""Simulation study of coefficient significance criteria with ROC summaries."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace

import numpy as np

from . import rng as rng_mod
from .core import DEFAULT_A, DEFAULT_B, fit_mml
from .data import Dataset, prepare_design
from .exceptions import CovarianceNotPD, DegenerateLabels, RidgeMMLError
from .parallel import pmap
from .posterior import posterior_fit, significance
from .serialize import SCHEMA, clean

HIGHER = "higher_is_nonzero"
LOWER = "lower_is_nonzero"
CRITERIA = ("ci50", "ci95", "sn")
DIAG_JITTER = 1e-3

# published (n, p, error variance) of the data sets without public copies
SURROGATE_SHAPES = {
    "teacher": (347, 349, 3e-13),
    "meaning": (20994, 113, 0.87),
    "blog": (52397, 2520, 0.62),
    "wheat": (24, 6, 0.03),
    "yarn": (28, 268, 3.8e-8),
    "lymphoma": (77, 7129, 4.1e-10),
    "cancer": (253, 15154, 1.3e-9),
}
SURROGATE_CORRELATION = 0.5


@dataclass(frozen=True)
class SimulationTemplate:
    """Shape of one simulated condition.

    Covariate rows are drawn from ``N(0, covariance)``. For surrogate
    templates the covariance is ``equicorrelation`` off the diagonal and one
    on it, plus the diagonal jitter, and is never formed explicitly.
    """

    name: str
    n: int
    p: int
    sigma2: float
    zero_proportion: float = 0.25
    seed: int = 0
    covariance: np.ndarray | None = None
    equicorrelation: float | None = None
    surrogate: bool = False

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if not 0.0 <= self.zero_proportion <= 1.0:
            raise ValueError("zero_proportion must lie in [0, 1]")
        if self.covariance is None and self.equicorrelation is None:
            raise ValueError("template needs a covariance or an equicorrelation")
        if self.covariance is not None:
            cov = np.asarray(self.covariance, dtype=float)
            if cov.shape != (self.p, self.p) or not np.allclose(cov, cov.T):
                raise CovarianceNotPD("covariance must be a symmetric p-by-p matrix")
            object.__setattr__(self, "covariance", cov)
        elif not -1.0 / max(self.p - 1, 1) < self.equicorrelation < 1.0:
            raise CovarianceNotPD(f"equicorrelation {self.equicorrelation} is not PD")

    def factor(self) -> np.ndarray:
        """Cholesky factor of the covariance (explicit templates only)."""
        try:
            return np.linalg.cholesky(self.covariance)
        except np.linalg.LinAlgError:
            raise CovarianceNotPD(f"covariance of template {self.name!r} is not PD") from None


def template_from_design(name, X_std, sigma2, **kw) -> SimulationTemplate:
    """Template whose covariance is ``X^T X / n`` plus the diagonal jitter."""
    X_std = np.asarray(X_std, dtype=float)
    n, p = X_std.shape
    cov = X_std.T @ X_std / n + DIAG_JITTER * np.eye(p)
    return SimulationTemplate(name, n, p, sigma2, covariance=cov, **kw)


def builtin_template(name: str, **kw) -> SimulationTemplate:
    """Templates shaped like the ten reference data sets.

    ``iris``, ``diabetes_q`` and ``diabetes_s`` use bundled data; the others
    are equicorrelated surrogates with the published sizes.
    """
    from .data import load_builtin

    variances = {"iris": 0.15, "diabetes_q": 0.48, "diabetes_s": 0.49}
    if name in variances:
        design = prepare_design(load_builtin(name))
        return template_from_design(name, design.X, variances[name], **kw)
    if name in SURROGATE_SHAPES:
        n, p, s2 = SURROGATE_SHAPES[name]
        return SimulationTemplate(name, n, p, s2, equicorrelation=SURROGATE_CORRELATION,
                                  surrogate=True, **kw)
    raise ValueError(f"unknown template {name!r}")


TEMPLATE_NAMES = ("iris", "teacher", "diabetes_q", "diabetes_s", "meaning", "blog",
                  "wheat", "yarn", "lymphoma", "cancer")


def true_coefficients(template: SimulationTemplate) -> np.ndarray:
    """Coefficients of the condition: standard normal with a share set to zero."""
    gen = rng_mod.stream(template.seed, rng_mod.SIMULATION, 0)
    beta = gen.standard_normal(template.p)
    n_zero = int(round(template.zero_proportion * template.p))
    if 0 < template.zero_proportion < 1:
        n_zero = min(max(n_zero, 1), template.p - 1)
    beta[gen.choice(template.p, size=n_zero, replace=False)] = 0.0
    return beta


def _draw_covariates(template, gen):
    n, p = template.n, template.p
    if template.covariance is not None:
        return gen.standard_normal((n, p)) @ template.factor().T
    rho = template.equicorrelation
    shared = gen.standard_normal((n, 1))
    own = gen.standard_normal((n, p))
    jitter = gen.standard_normal((n, p))
    # rho * 11^T + (1 - rho) I + jitter * I
    return np.sqrt(rho) * shared + np.sqrt(1.0 - rho) * own + np.sqrt(DIAG_JITTER) * jitter


def simulate_dataset(template: SimulationTemplate, replication: int = 0):
    """Draw one data set ``(X, y, beta_true)`` for a replication of a condition."""
    beta = true_coefficients(template)
    gen = rng_mod.stream(template.seed, rng_mod.SIMULATION, 1, replication)
    X = _draw_covariates(template, gen)
    y = X @ beta + np.sqrt(template.sigma2) * gen.standard_normal(template.n)
    return X, y, beta


@dataclass(frozen=True)
class RocResult:
    auc: float
    sensitivity: float
    specificity: float
    threshold_rule: str


def auc_mann_whitney(scores, positive) -> float:
    """Probability that a positive outranks a negative, ties counted as one half."""
    scores = np.asarray(scores, dtype=float)
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size)
    sorted_scores = scores[order]
    # midranks for tied blocks
    boundaries = np.flatnonzero(np.diff(sorted_scores)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [scores.size]))
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + e + 1)
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_analysis(scores, is_zero, orientation: str = HIGHER, flags=None,
                 threshold=None) -> RocResult:
    """AUC, sensitivity and specificity of a significance score.

    Sensitivity is the share of truly zero coefficients left unflagged and
    specificity the share of truly nonzero coefficients flagged. ``flags``
    marks covariates declared significant; when omitted they come from
    ``threshold`` (default 0.975 for ``higher`` scores and 0.5 for ``lower``).
    """
    scores = np.asarray(scores, dtype=float)
    is_zero = np.asarray(is_zero, dtype=bool)
    if scores.shape != is_zero.shape:
        raise ValueError("scores and labels must have the same length")
    if is_zero.all() or not is_zero.any():
        raise DegenerateLabels("need at least one zero and one nonzero coefficient")
    if orientation not in (HIGHER, LOWER):
        raise ValueError(f"unknown orientation {orientation!r}")
    oriented = scores if orientation == HIGHER else -scores
    auc = auc_mann_whitney(oriented, ~is_zero)
    if flags is None:
        if threshold is None:
            threshold = 0.975 if orientation == HIGHER else 0.5
        flags = scores > threshold if orientation == HIGHER else scores < threshold
        rule = f"score {'>' if orientation == HIGHER else '<'} {threshold:g}"
    else:
        rule = "supplied flags"
    flags = np.asarray(flags, dtype=bool)
    sens = float(np.mean(~flags[is_zero]))
    spec = float(np.mean(flags[~is_zero]))
    return RocResult(auc, sens, spec, rule)


_RULES = {
    "ci50": ("ci_score", "flag_ci50", HIGHER, "0 outside 50% interval"),
    "ci95": ("ci_score", "flag_ci95", HIGHER, "0 outside 95% interval"),
    "sn": ("sn", "flag_sn", LOWER, "SN < 1/2"),
}


def score_replication(template, replication, models=("rr", "prr", "grr"),
                      criteria=CRITERIA, a=DEFAULT_A, b=DEFAULT_B):
    """Fit every model on one simulated data set and score each criterion."""
    X, y, beta = simulate_dataset(template, replication)
    is_zero = beta == 0
    design = prepare_design(Dataset(y, X))
    out = []
    for model in models:
        try:
            fit = fit_mml(design, model, a=a, b=b)
            report = significance(posterior_fit(design, fit.profile, a, b))
        except (RidgeMMLError, np.linalg.LinAlgError, FloatingPointError) as exc:
            out.extend({"model": model, "criterion": c, "error": type(exc).__name__}
                       for c in criteria)
            continue
        for crit in criteria:
            score_attr, flag_attr, orientation, rule = _RULES[crit]
            roc = roc_analysis(getattr(report, score_attr), is_zero, orientation,
                               flags=getattr(report, flag_attr))
            out.append({"model": model, "criterion": crit, "auc": roc.auc,
                        "sensitivity": roc.sensitivity,
                        "specificity": roc.specificity, "rule": rule})
    return out


@dataclass(frozen=True)
class StudyTable:
    """Per-condition means and standard deviations of the ROC statistics."""

    rows: list
    details: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        if not self.rows:
            return ""
        w = csv.DictWriter(buf, fieldnames=list(self.rows[0]), lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow(clean(row))
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(clean({"schema": SCHEMA, "rows": self.rows}), indent=2)

    def details_jsonl(self) -> str:
        return "".join(json.dumps(clean(d)) + "\n" for d in self.details)

    def summary(self):
        """Mean and standard deviation across conditions per (model, criterion)."""
        groups = {}
        for row in self.rows:
            groups.setdefault((row["model"], row["criterion"]), []).append(row)
        out = []
        for (model, crit), rows in groups.items():
            entry = {"model": model, "criterion": crit}
            for stat in ("auc", "sensitivity", "specificity"):
                vals = np.array([r[f"{stat}_mean"] for r in rows], dtype=float)
                vals = vals[np.isfinite(vals)]
                entry[f"{stat}_mean"] = float(vals.mean()) if vals.size else float("nan")
                entry[f"{stat}_sd"] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            out.append(entry)
        return out


def _condition_seed(seed, t_index, z_index) -> int:
    return int(np.random.SeedSequence([int(seed), t_index, z_index]).generate_state(1)[0])


def run_study(templates, replications: int = 50, models=("rr", "prr", "grr"),
              criteria=CRITERIA, seed: int = 0, zero_proportions=(0.25, 0.75),
              a=DEFAULT_A, b=DEFAULT_B, workers=None) -> StudyTable:
    """Fully crossed template by zero-proportion study with ROC summaries.

    A failed fit marks its replication and is excluded from the averages.
    """
    templates = list(templates)
    if not templates:
        raise ValueError("need at least one template")
    rows, details = [], []
    for ti, tmpl in enumerate(templates):
        for zi, zp in enumerate(zero_proportions):
            cond = replace(tmpl, zero_proportion=zp, seed=_condition_seed(seed, ti, zi))
            reps = pmap(lambda r, cond=cond: score_replication(cond, r, models, criteria,
                                                               a, b),
                        range(replications), workers)
            for r, rep in enumerate(reps):
                for entry in rep:
                    details.append({"template": tmpl.name, "zero_proportion": zp,
                                    "replication": r, **entry})
            for model in models:
                for crit in criteria:
                    ok = [e for rep in reps for e in rep
                          if e["model"] == model and e["criterion"] == crit
                          and "error" not in e]
                    row = {"template": tmpl.name, "surrogate": tmpl.surrogate,
                           "zero_proportion": zp, "model": model, "criterion": crit,
                           "replications": len(ok),
                           "failures": replications - len(ok)}
                    for stat in ("auc", "sensitivity", "specificity"):
                        vals = np.array([e[stat] for e in ok])
                        row[f"{stat}_mean"] = float(vals.mean()) if vals.size else float("nan")
                        row[f"{stat}_sd"] = (float(vals.std(ddof=1)) if vals.size > 1
                                             else 0.0)
                    rows.append(row)
    return StudyTable(rows, details)
