"""Command-line interface: ``ridge-mml {fit,compare,curve,simulate,predict}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time

import numpy as np

from . import baselines, core, posterior
from .data import (
    UNIT_SUM_OF_SQUARES,
    UNIT_VARIANCE,
    StandardizedDesign,
    back_transform,
    load_builtin,
    prepare_design,
    read_csv,
)
from .exceptions import ConfigError, IoError, RidgeMMLError
from .serialize import SCHEMA, clean

MODELS = ("rr", "prr", "grr")
ESTIMATORS = ("mml", "hkb", "hkb-ext", "gcv", "bic", "aic", "cv10", "gibbs")
COMPARE_DEFAULT = "rr,prr,grr,hkb,hkb-ext,gcv,bic,aic,cv10"
_MODES = {"variance": UNIT_VARIANCE, "ss": UNIT_SUM_OF_SQUARES}


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _common(p: argparse.ArgumentParser, data=True):
    if data:
        p.add_argument("--data", required=True,
                       help="CSV file with a header row, a .npz design cache, "
                            "or builtin:NAME (iris, diabetes, diabetes_q, diabetes_s)")
        p.add_argument("--response", default="0", help="response column name or index")
        p.add_argument("--standardize", choices=sorted(_MODES), default="variance")
        p.add_argument("--scale-y", type=_bool, default=True, metavar="BOOL")
        p.add_argument("--cache", help="write the standardized design and SVD here")
    p.add_argument("--a", type=float, default=core.DEFAULT_A)
    p.add_argument("--b", type=float, default=core.DEFAULT_B)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default: standard output)")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--omit-timing", action="store_true",
                   help="leave timing fields out so repeated runs are byte-identical")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ridge-mml",
        description="Marginal maximum likelihood shrinkage estimation for ridge models.")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="estimate shrinkage and summarize the posterior")
    _common(fit)
    fit.add_argument("--model", choices=MODELS, default="rr")
    fit.add_argument("--estimator", choices=ESTIMATORS, default="mml")
    fit.add_argument("--grid-max", type=float, default=500.0)
    fit.add_argument("--grid-step", type=float, default=0.005)
    fit.add_argument("--iterations", type=int, default=110_000)
    fit.add_argument("--burn-in", type=int, default=10_000)
    fit.add_argument("--coefficients", action="store_true",
                     help="include intercept and slopes on the original scale")
    fit.add_argument("--significance", action="store_true",
                     help="include interval and scaled-neighborhood criteria")

    cmp_ = sub.add_parser("compare", help="run several estimators on one data set")
    _common(cmp_)
    cmp_.add_argument("--estimators", default=COMPARE_DEFAULT,
                      help="comma list from rr, prr, grr, hkb, hkb-ext, gcv, bic, aic, "
                           "cv10, gibbs")
    cmp_.add_argument("--grid-max", type=float, default=500.0)
    cmp_.add_argument("--grid-step", type=float, default=0.005)
    cmp_.add_argument("--iterations", type=int, default=110_000)
    cmp_.add_argument("--burn-in", type=int, default=10_000)

    curve = sub.add_parser("curve", help="criterion values over a shrinkage grid")
    _common(curve)
    curve.add_argument("--model", choices=("rr", "prr"), default="rr")
    curve.add_argument("--criterion", choices=("logml", "gcv", "bic", "aic", "cv10"),
                       default="logml")
    curve.add_argument("--grid-max", type=float, default=5.0)
    curve.add_argument("--grid-step", type=float, default=0.01)
    curve.add_argument("--delta-min", type=float, default=-3.0)
    curve.add_argument("--delta-max", type=float, default=3.0)
    curve.add_argument("--delta-step", type=float, default=0.1)

    sim = sub.add_parser("simulate", help="ROC simulation study")
    _common(sim, data=False)
    sim.add_argument("--templates", default="iris")
    sim.add_argument("--replications", type=int, default=50)
    sim.add_argument("--models", default="rr,prr,grr")
    sim.add_argument("--details", help="write per-replication results as JSON lines")
    sim.add_argument("--aggregate", action="store_true",
                     help="report means over conditions per model and criterion")

    pred = sub.add_parser("predict", help="posterior predictive for new rows")
    _common(pred)
    pred.add_argument("--model", choices=MODELS, default="rr")
    pred.add_argument("--new", required=True, help="CSV with the covariate columns")
    pred.add_argument("--classify", action="store_true",
                      help="report P(response > 0) for +/-1 coded responses")
    return parser


def _load_design(args) -> StandardizedDesign:
    src = args.data
    if src.endswith(".npz"):
        return StandardizedDesign.load(src)
    if src.startswith("builtin:"):
        dataset = load_builtin(src.split(":", 1)[1])
    else:
        dataset = read_csv(src, args.response)
    design = prepare_design(dataset, _MODES[args.standardize], args.scale_y)
    if args.cache:
        design.save(args.cache)
    return design


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, round(time.perf_counter() - t0, 3)


def _lambda_fields(lam) -> dict:
    if np.ndim(lam) == 0:
        return {"lambda_hat": float(lam)}
    lam = np.asarray(lam)
    return {"lambda_hat": lam, "lambda_min": float(lam.min()),
            "lambda_max": float(lam.max())}


def _select(design, estimator, args):
    """Return (spec, extra fields) for a single-shrinkage baseline selector."""
    grid = baselines.GridSpec(0.0, args.grid_max, args.grid_step)
    extra = {}
    if estimator == "hkb":
        lam = baselines.hkb_classic(design)
    elif estimator == "hkb-ext":
        lam, rank = baselines.hkb_extended(design, return_rank=True)
        extra["components"] = rank
    elif estimator == "gcv":
        lam = baselines.gcv_select(design, grid).chosen
    elif estimator in ("bic", "aic"):
        lam = baselines.ic_select(design, estimator.upper(), grid).chosen
    elif estimator == "cv10":
        lam = baselines.cv10_select(design, seed=args.seed).chosen
    elif estimator == "gibbs":
        g = baselines.gibbs_rr(design, args.a, args.b, iterations=args.iterations,
                               burn_in=args.burn_in, seed=args.seed)
        lam = g.lambda_mean
        extra["lambda_posterior_sd"] = float(np.sqrt(g.lambda_var))
    else:
        raise ConfigError(f"unknown estimator {estimator!r}")
    return core.RidgeSpec.rr(lam, a=args.a, b=args.b), extra


def cmd_fit(args):
    t0 = time.perf_counter()
    design = _load_design(args)
    if args.estimator == "mml":
        fit = core.fit_mml(design, args.model, args.a, args.b)
        spec, extra = fit.spec, {"converged": fit.converged,
                                 "objective_evals": fit.objective_evals}
        if fit.message:
            extra["message"] = fit.message
    else:
        if args.model != "rr":
            raise ConfigError(f"estimator {args.estimator!r} only applies to --model rr")
        spec, extra = _select(design, args.estimator, args)
    profile = core.lambda_vector(spec, design.d)
    summ = posterior.posterior_fit(design, profile, args.a, args.b)
    diag = posterior.diagnostics(summ, design)
    elapsed = max(round(time.perf_counter() - t0, 3), 0.001)
    doc = {"schema": SCHEMA, "command": "fit", "model": spec.family,
           "estimator": args.estimator, "n": design.n, "p": design.p, "q": design.q,
           **_lambda_fields(spec.lam)}
    if spec.family == "prr":
        doc["delta_hat"] = spec.delta
    doc.update({
        "log_ml": core.log_marginal(design, profile, args.a, args.b),
        "df": diag.df, "r_squared": diag.r_squared, "sigma2_mean": summ.sigma2_mean,
        **extra,
    })
    if not args.omit_timing:
        doc["seconds"] = elapsed
    if args.coefficients:
        coef = back_transform(summ.beta_bar, design.standardization)
        doc["coefficients"] = {"intercept": coef[0],
                               "slopes": dict(zip(design.column_names, coef[1:]))}
    if args.significance:
        doc["significance"] = list(
            posterior.significance(summ, column_names=design.column_names).rows())
    return doc, "json"


def _profile_rule(spec):
    """Map a fitted spec to a fold-level shrinkage rule for cross-validation."""
    if spec.family == "grr":
        lam = spec.lam

        def rule(d):
            out = np.full(d.shape[0], spec.lambda_max)
            m = min(d.shape[0], lam.shape[0])
            out[:m] = lam[:m]
            return out
        return rule
    return lambda d: core.lambda_vector(spec, d).lambdas


def cmd_compare(args):
    design = _load_design(args)
    names = [e.strip() for e in args.estimators.split(",") if e.strip()]
    allowed = set(MODELS) | set(ESTIMATORS) - {"mml"}
    bad = [e for e in names if e not in allowed]
    if bad:
        raise ConfigError(f"unknown estimators: {', '.join(bad)}")
    rows = []
    for name in names:
        row = {"estimator": name, "lambda_hat": None, "lambda_min": None,
               "lambda_max": None, "delta_hat": None, "log_ml": None, "cv10": None,
               "cv10_se": None, "seconds": None, "error": ""}
        try:
            if name in MODELS:
                fit, secs = _timed(lambda: core.fit_mml(design, name, args.a, args.b))
                spec = fit.spec
            else:
                (spec, _), secs = _timed(lambda: _select(design, name, args))
            lam = np.atleast_1d(spec.lam)
            row.update(lambda_hat=float(lam[0]) if spec.family != "grr" else None,
                       lambda_min=float(lam.min()), lambda_max=float(lam.max()),
                       seconds=max(secs, 0.001))
            if spec.family == "prr":
                row["delta_hat"] = spec.delta
            profile = core.lambda_vector(spec, design.d)
            row["log_ml"] = core.log_marginal(design, profile, args.a, args.b)
            row["cv10"], row["cv10_se"] = baselines.cv_score(design, _profile_rule(spec),
                                                             seed=args.seed)
        except RidgeMMLError as exc:
            row["error"] = f"{exc.kind}: {exc}"
        if args.omit_timing:
            row.pop("seconds")
        rows.append(row)
    return {"schema": SCHEMA, "command": "compare", "rows": rows}, "csv"


def cmd_curve(args):
    design = _load_design(args)
    if args.grid_step <= 0 or args.grid_max < args.grid_step:
        raise ConfigError("need 0 < grid-step <= grid-max")
    grid = baselines.GridSpec(args.grid_step, args.grid_max, args.grid_step).values()
    if args.model == "prr":
        if args.criterion != "logml":
            raise ConfigError("the PRR lattice is only available for --criterion logml")
        deltas = baselines.GridSpec(args.delta_min, args.delta_max,
                                    args.delta_step).values()
        logd = np.log(design.d)
        rows = []
        for lam in grid:
            lams = np.clip(lam * np.exp(-2.0 * np.outer(deltas, logd)), 0, core.LAMBDA_MAX)
            vals = core.log_marginal(design, lams, args.a, args.b)
            rows.extend({"lambda": lam, "delta": dl, "log_ml": v}
                        for dl, v in zip(deltas, vals))
        return {"schema": SCHEMA, "command": "curve", "rows": rows}, "csv"
    if args.criterion == "logml":
        vals = core.log_marginal(design, grid[:, None] * np.ones(design.q), args.a, args.b)
        rows = [{"lambda": g, "log_ml": v} for g, v in zip(grid, vals)]
    else:
        if args.criterion == "gcv":
            trace = baselines.gcv_select(design, grid)
        elif args.criterion == "cv10":
            trace = baselines.cv10_select(design, seed=args.seed)
        else:
            trace = baselines.ic_select(design, args.criterion.upper(), grid)
        rows = []
        for i, (g, v) in enumerate(zip(trace.grid, trace.criterion)):
            row = {"lambda": g, args.criterion: v}
            if trace.se is not None:
                row["se"] = trace.se[i]
            rows.append(row)
    return {"schema": SCHEMA, "command": "curve", "rows": rows}, "csv"


def cmd_simulate(args):
    from .simulation import builtin_template, run_study

    names = [t.strip() for t in args.templates.split(",") if t.strip()]
    models = tuple(m.strip() for m in args.models.split(",") if m.strip())
    bad = [m for m in models if m not in MODELS]
    if bad:
        raise ConfigError(f"unknown models: {', '.join(bad)}")
    try:
        templates = [builtin_template(t) for t in names]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    table = run_study(templates, args.replications, models, seed=args.seed,
                      a=args.a, b=args.b)
    if args.details:
        with open(args.details, "w", encoding="utf-8") as fh:
            fh.write(table.details_jsonl())
    rows = table.summary() if args.aggregate else table.rows
    return {"schema": SCHEMA, "command": "simulate", "rows": rows}, "csv"


def cmd_predict(args):
    design = _load_design(args)
    new = _read_new_rows(args.new, design.column_names)
    fit = core.fit_mml(design, args.model, args.a, args.b)
    summ = posterior.posterior_fit(design, fit.profile, args.a, args.b)
    s = design.standardization
    Xs = s.transform_covariates(new)
    mean, var, dof = posterior.predictive(summ, design, Xs)
    probs = None
    if args.classify:
        probs = np.atleast_1d(posterior.class_probability(summ, design, Xs,
                                                          s.y_mean / s.y_scale))
    rows = []
    for i in range(new.shape[0]):
        row = {"row": i, "mean": float(s.inverse_response(mean[i])),
               "variance": float(var[i] * s.y_scale**2), "dof": dof}
        if probs is not None:
            row["probability"] = float(probs[i])
        rows.append(row)
    return {"schema": SCHEMA, "command": "predict", "model": args.model,
            **_lambda_fields(fit.lambda_hat), "rows": rows}, "json"


def _read_new_rows(path, names):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    out = np.empty((len(rows), len(names)))
    for i, row in enumerate(rows):
        for j, name in enumerate(names):
            if name not in row:
                raise IoError(f"column {name!r} missing from {path}")
            try:
                out[i, j] = float(row[name])
            except (TypeError, ValueError):
                raise IoError(f"non-numeric value in {path} row {i + 2}") from None
    return out


def _render(doc, fmt) -> str:
    if fmt == "json":
        return json.dumps(clean(doc), indent=2) + "\n"
    rows = doc.get("rows")
    if rows is None:
        rows = [{k: v for k, v in doc.items() if not isinstance(v, (dict, list, np.ndarray))}]
    buf = io.StringIO()
    if rows:
        fields = list(rows[0])
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if v is None else v) for k, v in clean(row).items()})
    return buf.getvalue()


COMMANDS = {"fit": cmd_fit, "compare": cmd_compare, "curve": cmd_curve,
            "simulate": cmd_simulate, "predict": cmd_predict}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        doc, default_fmt = COMMANDS[args.command](args)
        text = _render(doc, args.format or default_fmt)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    except (RidgeMMLError, OSError) as exc:
        kind = exc.kind if isinstance(exc, RidgeMMLError) else "IoError"
        err = {"schema": SCHEMA, "error": {"kind": kind, "message": str(exc)}}
        sys.stdout.write(json.dumps(err) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
