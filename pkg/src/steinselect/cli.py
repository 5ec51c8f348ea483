"""Command-line interface wiring the full toolchain.

Subcommands: ``select`` (eigen-selection on a CSV), ``screen`` (screening
then selection), ``simulate`` (write a synthetic dataset), ``benchmark``
(replication sweeps to a summary CSV), ``refit`` and ``predict`` (two-step
regression). Flags override values from an optional JSON ``--config`` file,
which overrides built-in defaults; unknown config keys are rejected.

Exit codes: 0 success, 2 validation failure, 3 numerical failure,
4 iteration limit.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .covariance import load_covariance_csv
from .data import (
    SimSpec,
    center_columns,
    derive_seed,
    load_csv,
    read_matrix_csv,
    save_csv,
    simulate,
    truth_to_json,
)
from .errors import (
    IterationLimitError,
    NumericalError,
    SteinSelectError,
    ValidationError,
)
from .metrics import PipelineConfig, run_replications
from .moments import ThresholdRule, TopSRule, selection_to_json
from .pipeline import SelectionPlan, run_selection
from .refit import RefitConfig, evaluate_mse, model_from_json, model_to_json, predict, train
from .screening import ScreeningConfig, trace_to_json

_JOBS_ENV = "STEINSELECT_JOBS"


# ---------------------------------------------------------------------------
# Config file merging: flags > config file > defaults
# ---------------------------------------------------------------------------

def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError("config file must hold a JSON object")
    return doc


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    """Resolve option values; every flag defaults to None so a config file
    can fill it before the hard default applies."""
    config = _load_config(getattr(args, "config", None))
    unknown = set(config) - set(defaults)
    if unknown:
        raise ValidationError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    out = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else config.get(key, default)
    return out


def _write_json(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _write_pairs_csv(path, header: tuple[str, str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for a, b in rows:
            writer.writerow([a, repr(float(b))])


def _parse_int_or_auto(value, name: str, minimum: int = 1) -> int | None:
    if value in (None, "auto"):
        return None
    try:
        number = int(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be an integer or 'auto', got {value!r}") from None
    if number < minimum:
        raise ValidationError(f"{name} must be >= {minimum}")
    return number


def _parse_float_or_auto(value, name: str) -> float | None:
    if value in (None, "auto"):
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a number or 'auto', got {value!r}") from None


def _refit_config(opts: dict, seed: int) -> RefitConfig:
    hidden = opts["refit_hidden"]
    if isinstance(hidden, str):
        hidden = tuple(int(w) for w in hidden.split(",") if w)
    return RefitConfig(
        hidden=tuple(hidden),
        epochs=int(opts["refit_epochs"]),
        batch_size=int(opts["refit_batch_size"]),
        learning_rate=float(opts["refit_lr"]),
        optimizer=str(opts["refit_optimizer"]),
        seed=seed,
        standardize_inputs=not bool(opts["refit_no_standardize"]),
    )


_SELECT_DEFAULTS = {
    "response": "y",
    "k1": "auto",
    "s": "auto",
    "kappa": None,
    "cov": "sample",
    "seed": 0,
    "k1_max": 15,
    "k1_rule": "ratio-minus-one",
    "bic_grid_max": 10,
    "out": "selection.json",
    "k1_csv": None,
    "bic_csv": None,
    "refit_hidden": (64, 32),
    "refit_epochs": 300,
    "refit_batch_size": 64,
    "refit_lr": 1e-3,
    "refit_optimizer": "sgd_momentum",
    "refit_no_standardize": False,
}

_SCREEN_DEFAULTS = {**_SELECT_DEFAULTS, "zeta": "auto", "p0": "auto", "max_rounds": 64, "trace": "trace.json"}


def _add_select_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("data", help="input dataset CSV")
    sub.add_argument("--config", help="JSON config file (flags override it)")
    sub.add_argument("--response", help="response column name (default y)")
    sub.add_argument("--k1", help="eigen rank, integer or 'auto' (eigengap ratio)")
    sub.add_argument("--s", help="sparsity level, integer or 'auto' (BIC)")
    sub.add_argument("--kappa", type=float, help="score threshold; overrides --s")
    sub.add_argument("--cov", help="sample | ledoit-wolf | known:<sigma.csv>")
    sub.add_argument("--seed", type=int, help="master seed for tuning refits")
    sub.add_argument("--k1-max", dest="k1_max", type=int, help="largest k probed by the eigengap rule")
    sub.add_argument("--k1-rule", dest="k1_rule", choices=["ratio-minus-one", "ratio"])
    sub.add_argument("--bic-grid-max", dest="bic_grid_max", type=int, help="BIC sweeps s = 1..this")
    sub.add_argument("--out", help="selection JSON output path")
    sub.add_argument("--k1-csv", dest="k1_csv", help="write (k, ratio) CSV; needs --k1 auto")
    sub.add_argument("--bic-csv", dest="bic_csv", help="write (s, bic) CSV; needs --s auto")
    sub.add_argument("--refit-hidden", dest="refit_hidden", help="comma widths, e.g. 64,32")
    sub.add_argument("--refit-epochs", dest="refit_epochs", type=int)
    sub.add_argument("--refit-batch-size", dest="refit_batch_size", type=int)
    sub.add_argument("--refit-lr", dest="refit_lr", type=float)
    sub.add_argument("--refit-optimizer", dest="refit_optimizer", choices=["sgd_momentum", "adaptive_moment"])
    sub.add_argument(
        "--refit-no-standardize", dest="refit_no_standardize", action="store_const", const=True
    )


def _resolve_covariance(opts: dict, p: int):
    """Returns (cov_method, known_model_or_None)."""
    spec = str(opts["cov"])
    if spec in ("sample", "ledoit-wolf", "ledoit_wolf"):
        return spec.replace("-", "_"), None
    if spec.startswith("known:"):
        cov = load_covariance_csv(spec[len("known:"):])
        if cov.p != p:
            raise ValidationError(f"known covariance is {cov.p} x {cov.p} but data has p={p}")
        return "known", cov
    raise ValidationError(f"--cov must be sample, ledoit-wolf, or known:<path>, got {spec!r}")


def _selection_plan(opts: dict, screened: bool, screening: ScreeningConfig | None = None) -> SelectionPlan:
    k1 = _parse_int_or_auto(opts["k1"], "k1")
    s = _parse_int_or_auto(opts["s"], "s")
    if opts["kappa"] is not None:
        rule = ThresholdRule(float(opts["kappa"]))
    elif s is not None:
        rule = TopSRule(s)
    else:
        rule = None
    refit_cfg = _refit_config(opts, derive_seed(int(opts["seed"]), "refit-init"))
    return SelectionPlan(
        screened=screened,
        cov_method="sample",  # replaced below when estimating
        k1=k1,
        rule=rule,
        screening=screening if screening is not None else ScreeningConfig(auto_defaults=True),
        k1_max=int(opts["k1_max"]),
        k1_rule=str(opts["k1_rule"]),
        bic_grid_max=int(opts["bic_grid_max"]),
        refit_cfg=refit_cfg,
    )


def _report_selection(d, artifacts, opts) -> None:
    result = artifacts.result
    print(f"n={d.n} p={d.p} covariance={opts['cov']}")
    source = "eigengap-ratio" if artifacts.eigengap is not None else "explicit"
    print(f"k1={result.k1_used} ({source})")
    rule = result.rule.to_json()
    if rule["type"] == "top_s":
        source = "bic" if artifacts.bic is not None else "explicit"
        print(f"rule=top_s s={rule['s']} ({source})")
    else:
        print(f"rule=threshold kappa={rule['kappa']:g}")
    ids = [d.feature_ids[j] for j in result.selected]
    print(f"selected {len(ids)} feature(s): {', '.join(ids)}")
    if result.empty_selection:
        print("warning: no feature cleared the threshold")


def _run_select_like(args, screened: bool) -> int:
    defaults = _SCREEN_DEFAULTS if screened else _SELECT_DEFAULTS
    opts = _merge(args, defaults)
    d = center_columns(load_csv(args.data, str(opts["response"])))
    cov_method, known = _resolve_covariance(opts, d.p)
    screening = None
    if screened:
        zeta = _parse_float_or_auto(opts["zeta"], "zeta")
        p0 = _parse_int_or_auto(opts["p0"], "p0")
        auto = zeta is None and p0 is None
        if auto:
            screening = ScreeningConfig(auto_defaults=True, max_rounds=int(opts["max_rounds"]))
        else:
            resolved_zeta, resolved_p0 = ScreeningConfig(auto_defaults=True).resolve(d.n)
            screening = ScreeningConfig(
                zeta=zeta if zeta is not None else resolved_zeta,
                p0=p0 if p0 is not None else resolved_p0,
                max_rounds=int(opts["max_rounds"]),
            )
    plan = _selection_plan(opts, screened, screening)
    plan = replace(plan, cov_method=cov_method if known is None else "sample")
    if opts["k1_csv"] is not None and plan.k1 is not None:
        raise ValidationError("--k1-csv requires --k1 auto")
    if opts["bic_csv"] is not None and plan.rule is not None:
        raise ValidationError("--bic-csv requires --s auto without --kappa")
    artifacts = run_selection(d, plan, known=known)
    _write_json(opts["out"], selection_to_json(artifacts.result, d.feature_ids))
    if screened:
        _write_json(opts["trace"], trace_to_json(artifacts.trace, d.feature_ids))
    if opts["k1_csv"] is not None:
        _write_pairs_csv(opts["k1_csv"], ("k", "ratio"), artifacts.eigengap.to_csv_rows())
    if opts["bic_csv"] is not None:
        _write_pairs_csv(opts["bic_csv"], ("s", "bic"), artifacts.bic.to_csv_rows())
    _report_selection(d, artifacts, opts)
    return 0


def cmd_select(args) -> int:
    return _run_select_like(args, screened=False)


def cmd_screen(args) -> int:
    return _run_select_like(args, screened=True)


_SIMULATE_DEFAULTS = {
    "case": None,
    "n": None,
    "p": None,
    "s": 5,
    "k1": 5,
    "rho": 0.0,
    "design": "gaussian",
    "noise_sd": 1.0,
    "seed": 0,
    "out": "data.csv",
    "truth_out": "truth.json",
    "response": "y",
}


def cmd_simulate(args) -> int:
    opts = _merge(args, _SIMULATE_DEFAULTS)
    for key in ("case", "n", "p"):
        if opts[key] is None:
            raise ValidationError(f"--{key} is required")
    spec = SimSpec(
        case=int(opts["case"]),
        n=int(opts["n"]),
        p=int(opts["p"]),
        s=int(opts["s"]),
        k1=int(opts["k1"]),
        rho=float(opts["rho"]),
        design=str(opts["design"]),
        noise_sd=float(opts["noise_sd"]),
        seed=int(opts["seed"]),
    )
    d, truth = simulate(spec)
    save_csv(d, opts["out"], response_column=str(opts["response"]))
    doc = truth_to_json(truth, d.feature_ids)
    doc["spec"] = spec.to_json()
    _write_json(opts["truth_out"], doc)
    print(f"wrote {opts['out']} (n={d.n}, p={d.p}) and {opts['truth_out']}")
    return 0


_BENCHMARK_DEFAULTS = {
    "grid": None,
    "out": "summary.csv",
    "jobs": None,
}

_GRID_KEYS = {
    "cases": None,
    "n": None,
    "p": None,
    "rho": [0.0],
    "design": "gaussian",
    "noise_sd": 1.0,
    "s": 5,
    "k1": 5,
    "reps": 20,
    "methods": ["plain"],
    "cov": "sample",
    "refit": False,
    "holdout_n": 2000,
    "refit_epochs": 300,
    "refit_hidden": [64, 32],
    "refit_lr": 1e-3,
    "refit_batch_size": 64,
    "refit_optimizer": "sgd_momentum",
    "master_seed": 0,
    "screening_max_rounds": 64,
}

_SUMMARY_COLUMNS = (
    "case",
    "n",
    "p",
    "rho",
    "design",
    "method",
    "tpr_mean",
    "tpr_sd",
    "fpr_mean",
    "fpr_sd",
    "mse_mean",
    "mse_sd",
    "runtime_ms",
    "failures",
)


def _load_grid(path: str) -> dict:
    if path is None:
        raise ValidationError("--grid is required")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"grid file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"grid file is not valid JSON: {exc}") from None
    unknown = set(doc) - set(_GRID_KEYS)
    if unknown:
        raise ValidationError(f"unknown grid key(s): {', '.join(sorted(unknown))}")
    grid = {**_GRID_KEYS, **doc}
    for key in ("cases", "n", "p"):
        if not grid[key]:
            raise ValidationError(f"grid key {key!r} must be a nonempty list")
    if int(grid["reps"]) < 1:
        raise ValidationError("reps must be >= 1")
    bad = [m for m in grid["methods"] if m not in ("plain", "screened")]
    if bad or not grid["methods"]:
        raise ValidationError("methods must be a nonempty subset of ['plain', 'screened']")
    return grid


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cmd_benchmark(args) -> int:
    opts = _merge(args, _BENCHMARK_DEFAULTS)
    grid = _load_grid(opts["grid"])
    jobs = opts["jobs"]
    if jobs is None:
        jobs = int(os.environ.get(_JOBS_ENV, "1"))
    jobs = max(1, int(jobs))
    master = int(grid["master_seed"])
    refit_cfg = RefitConfig(
        hidden=tuple(grid["refit_hidden"]),
        epochs=int(grid["refit_epochs"]),
        batch_size=int(grid["refit_batch_size"]),
        learning_rate=float(grid["refit_lr"]),
        optimizer=str(grid["refit_optimizer"]),
    )
    rows = []
    cells = list(itertools.product(grid["cases"], grid["n"], grid["p"], grid["rho"], grid["methods"]))
    for case, n, p, rho, method in cells:
        spec = SimSpec(
            case=int(case),
            n=int(n),
            p=int(p),
            s=int(grid["s"]),
            k1=int(grid["k1"]),
            rho=float(rho),
            design=str(grid["design"]),
            noise_sd=float(grid["noise_sd"]),
            seed=0,
        )
        pipeline = PipelineConfig(
            method=str(method),
            cov_method=str(grid["cov"]).replace("-", "_"),
            k1=int(grid["k1"]),
            s=int(grid["s"]),
            screening=ScreeningConfig(auto_defaults=True, max_rounds=int(grid["screening_max_rounds"])),
            refit=bool(grid["refit"]),
            refit_cfg=refit_cfg,
            holdout_n=int(grid["holdout_n"]),
        )
        seeds = [
            derive_seed(master, str(case), int(n), int(p), repr(float(rho)), str(method), rep)
            for rep in range(int(grid["reps"]))
        ]
        summary = run_replications(spec, pipeline, seeds, jobs=jobs)
        runtime_ms = sum(o.runtime_ms for o in summary.outcomes) / len(summary.outcomes)
        rows.append(
            {
                "case": case,
                "n": n,
                "p": p,
                "rho": rho,
                "design": grid["design"],
                "method": method,
                "tpr_mean": summary.tpr_mean,
                "tpr_sd": summary.tpr_sd,
                "fpr_mean": summary.fpr_mean,
                "fpr_sd": summary.fpr_sd,
                "mse_mean": summary.mse_mean,
                "mse_sd": summary.mse_sd,
                "runtime_ms": runtime_ms,
                "failures": summary.failures,
            }
        )
        print(
            f"case={case} n={n} p={p} rho={rho} method={method}: "
            f"tpr={summary.tpr_mean:.3f} fpr={summary.fpr_mean:.4f} failures={summary.failures}"
        )
    with open(opts["out"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in _SUMMARY_COLUMNS])
    return 0


_REFIT_DEFAULTS = {
    "response": "y",
    "seed": 0,
    "out": "model.json",
    "refit_hidden": (64, 32),
    "refit_epochs": 300,
    "refit_batch_size": 64,
    "refit_lr": 1e-3,
    "refit_optimizer": "sgd_momentum",
    "refit_no_standardize": False,
}


def cmd_refit(args) -> int:
    opts = _merge(args, _REFIT_DEFAULTS)
    d = load_csv(args.data, str(opts["response"]))
    try:
        selection = json.loads(Path(args.selection).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read selection file: {exc}") from None
    ids = selection.get("selected")
    if not ids:
        raise ValidationError("selection file has no selected features")
    id_to_col = {fid: j for j, fid in enumerate(d.feature_ids)}
    missing = [fid for fid in ids if fid not in id_to_col]
    if missing:
        raise ValidationError(f"selection ids absent from data header: {', '.join(missing)}")
    selected = [id_to_col[fid] for fid in ids]
    cfg = _refit_config(opts, derive_seed(int(opts["seed"]), "refit-init"))
    model = train(d, selected, cfg)
    doc = model_to_json(model)
    doc["response_column"] = str(opts["response"])
    _write_json(opts["out"], doc)
    print(f"final training mse {model.loss_curve[-1]!r}")
    return 0


_PREDICT_DEFAULTS = {"out": "predictions.csv"}


def cmd_predict(args) -> int:
    opts = _merge(args, _PREDICT_DEFAULTS)
    try:
        doc = json.loads(Path(args.model).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read model file: {exc}") from None
    model = model_from_json(doc)
    header, data = read_matrix_csv(args.newdata)
    col = {c: j for j, c in enumerate(header)}
    missing = [fid for fid in model.feature_ids if fid not in col]
    if missing:
        raise ValidationError(f"model ids absent from newdata header: {', '.join(missing)}")
    X = data[:, [col[fid] for fid in model.feature_ids]]
    preds = predict(model, X)
    with open(opts["out"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y_hat"])
        for v in preds:
            writer.writerow([repr(float(v))])
    response = doc.get("response_column")
    if response is not None and response in col:
        mse = float(np.mean((preds - data[:, col[response]]) ** 2))
        print(f"mse {mse!r}")
    print(f"wrote {opts['out']} ({len(preds)} rows)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="steinselect",
        description="Gradient-descent-free nonlinear feature selection via second-order Stein moments",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_select = subs.add_parser("select", help="eigen-selection on a dataset CSV")
    _add_select_flags(p_select)
    p_select.set_defaults(func=cmd_select)

    p_screen = subs.add_parser("screen", help="diagonal screening followed by selection")
    _add_select_flags(p_screen)
    p_screen.add_argument("--zeta", help="per-round keep fraction in (0,1) or 'auto'")
    p_screen.add_argument("--p0", help="target dimension or 'auto'")
    p_screen.add_argument("--max-rounds", dest="max_rounds", type=int)
    p_screen.add_argument("--trace", help="screening trace JSON output path")
    p_screen.set_defaults(func=cmd_screen)

    p_sim = subs.add_parser("simulate", help="write a synthetic dataset and its ground truth")
    p_sim.add_argument("--config", help="JSON config file (flags override it)")
    p_sim.add_argument("--case", type=int)
    p_sim.add_argument("--n", type=int)
    p_sim.add_argument("--p", type=int)
    p_sim.add_argument("--s", type=int)
    p_sim.add_argument("--k1", type=int)
    p_sim.add_argument("--rho", type=float)
    p_sim.add_argument("--design", help="gaussian or t<dof>, e.g. t7")
    p_sim.add_argument("--noise-sd", dest="noise_sd", type=float)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--out")
    p_sim.add_argument("--truth-out", dest="truth_out")
    p_sim.add_argument("--response")
    p_sim.set_defaults(func=cmd_simulate)

    p_bench = subs.add_parser("benchmark", help="replication sweep over a simulation grid")
    p_bench.add_argument("--config", help="JSON config file (flags override it)")
    p_bench.add_argument("--grid", help="grid JSON file")
    p_bench.add_argument("--out")
    p_bench.add_argument("--jobs", type=int, help=f"parallel replications (default ${_JOBS_ENV} or 1)")
    p_bench.set_defaults(func=cmd_benchmark)

    p_refit = subs.add_parser("refit", help="train the refit network on selected features")
    p_refit.add_argument("data", help="training dataset CSV")
    p_refit.add_argument("selection", help="selection JSON from select/screen")
    p_refit.add_argument("--config", help="JSON config file (flags override it)")
    p_refit.add_argument("--response")
    p_refit.add_argument("--seed", type=int)
    p_refit.add_argument("--out")
    p_refit.add_argument("--refit-hidden", dest="refit_hidden")
    p_refit.add_argument("--refit-epochs", dest="refit_epochs", type=int)
    p_refit.add_argument("--refit-batch-size", dest="refit_batch_size", type=int)
    p_refit.add_argument("--refit-lr", dest="refit_lr", type=float)
    p_refit.add_argument(
        "--refit-optimizer", dest="refit_optimizer", choices=["sgd_momentum", "adaptive_moment"]
    )
    p_refit.add_argument(
        "--refit-no-standardize", dest="refit_no_standardize", action="store_const", const=True
    )
    p_refit.set_defaults(func=cmd_refit)

    p_pred = subs.add_parser("predict", help="predict with a stored refit model")
    p_pred.add_argument("model", help="model JSON from refit")
    p_pred.add_argument("newdata", help="feature CSV; columns matched by id")
    p_pred.add_argument("--config", help="JSON config file (flags override it)")
    p_pred.add_argument("--out")
    p_pred.set_defaults(func=cmd_predict)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IterationLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except np.linalg.LinAlgError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 3
    except SteinSelectError as exc:  # safety net for anything uncategorized
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
