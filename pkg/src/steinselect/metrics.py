"""Selection/prediction quality metrics and seeded replication sweeps.

TPR and FPR follow the usual set definitions against the generating support;
replication summaries report mean and population standard deviation (divide
by the replication count) across seeds. One replication is the full pipeline
simulate -> center -> covariance -> (screen ->) select -> metrics, with an
optional refit evaluated on freshly drawn held-out rows.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .covariance import known_covariance
from .data import SimSpec, ar1_sigma, center_columns, derive_seed, simulate, simulate_from_truth
from .errors import SteinSelectError, ValidationError
from .moments import SelectionResult, ThresholdRule, TopSRule
from .pipeline import SelectionPlan, run_selection
from .refit import RefitConfig, evaluate_mse, train
from .screening import ScreeningConfig


@dataclass(frozen=True)
class SelectionMetrics:
    tpr: float
    fpr: float
    selected_count: int
    truth_count: int
    selected: tuple[int, ...]
    truth: tuple[int, ...]
    p: int


def selection_metrics(selected, truth, p: int) -> SelectionMetrics:
    """TPR = |S^ & S0| / |S0|, FPR = |S^ \\ S0| / (p - |S0|)."""
    selected = frozenset(int(j) for j in selected)
    truth = frozenset(int(j) for j in truth)
    if len(truth) == 0:
        raise ValidationError("truth set is empty; TPR undefined")
    if any(not 0 <= j < p for j in selected | truth):
        raise ValidationError(f"indices out of range for p={p}")
    if len(truth) >= p:
        raise ValidationError("truth covers all features; FPR undefined")
    tpr = len(selected & truth) / len(truth)
    fpr = len(selected - truth) / (p - len(truth))
    return SelectionMetrics(
        tpr=tpr,
        fpr=fpr,
        selected_count=len(selected),
        truth_count=len(truth),
        selected=tuple(sorted(selected)),
        truth=tuple(sorted(truth)),
        p=p,
    )


@dataclass(frozen=True)
class PipelineConfig:
    """One benchmark variant: how covariance, selection, and refit run."""

    method: str = "plain"  # "plain" | "screened"
    cov_method: str = "sample"  # "sample" | "ledoit_wolf" | "known"
    k1: int | None = 5  # None -> eigengap-ratio rule
    s: int | None = 5  # None -> BIC sweep (unless kappa is set)
    kappa: float | None = None
    screening: ScreeningConfig = ScreeningConfig(auto_defaults=True)
    k1_max: int = 15
    k1_rule: str = "ratio-minus-one"
    bic_grid_max: int = 10
    refit: bool = False
    refit_cfg: RefitConfig = RefitConfig()
    holdout_n: int = 2000

    def __post_init__(self):
        if self.method not in ("plain", "screened"):
            raise ValidationError(f"method must be plain or screened, got {self.method!r}")
        if self.cov_method not in ("sample", "ledoit_wolf", "known"):
            raise ValidationError(f"unknown covariance method {self.cov_method!r}")

    def plan(self) -> SelectionPlan:
        if self.kappa is not None:
            rule = ThresholdRule(self.kappa)
        elif self.s is not None:
            rule = TopSRule(self.s)
        else:
            rule = None  # BIC sweep
        return SelectionPlan(
            screened=self.method == "screened",
            cov_method=self.cov_method if self.cov_method != "known" else "sample",
            k1=self.k1,
            rule=rule,
            screening=self.screening,
            k1_max=self.k1_max,
            k1_rule=self.k1_rule,
            bic_grid_max=self.bic_grid_max,
            refit_cfg=self.refit_cfg,
        )

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "cov_method": self.cov_method,
            "k1": self.k1,
            "s": self.s,
            "kappa": self.kappa,
            "screening": {
                "zeta": self.screening.zeta,
                "p0": self.screening.p0,
                "auto_defaults": self.screening.auto_defaults,
                "max_rounds": self.screening.max_rounds,
            },
            "k1_max": self.k1_max,
            "k1_rule": self.k1_rule,
            "bic_grid_max": self.bic_grid_max,
            "refit": self.refit,
            "refit_cfg": self.refit_cfg.to_json(),
            "holdout_n": self.holdout_n,
        }


def run_pipeline(
    spec: SimSpec, pipeline: PipelineConfig, seed: int
) -> tuple[SelectionResult, SelectionMetrics, float | None]:
    """One full replication at the given simulation seed."""
    sim = replace(spec, seed=seed)
    d_raw, truth = simulate(sim)
    d = center_columns(d_raw)
    known = known_covariance(ar1_sigma(sim.p, sim.rho)) if pipeline.cov_method == "known" else None
    artifacts = run_selection(d, pipeline.plan(), known=known)
    result = artifacts.result
    metrics = selection_metrics(result.selected, truth.support, sim.p)
    mse = None
    if pipeline.refit:
        if len(result.selected) == 0:
            raise ValidationError("refit requested but the selection is empty")
        cfg = replace(pipeline.refit_cfg, seed=derive_seed(seed, "refit-init"))
        model = train(d_raw, result.selected, cfg)
        holdout = simulate_from_truth(sim, truth, pipeline.holdout_n, derive_seed(seed, "holdout"))
        mse = evaluate_mse(model, holdout)
    return result, metrics, mse


@dataclass(frozen=True)
class ReplicationOutcome:
    seed: int
    tpr: float | None
    fpr: float | None
    mse: float | None
    runtime_ms: float
    error: str | None = None


def _population_sd(values) -> float:
    k = len(values)
    mean = sum(values) / k
    return math.sqrt(sum((v - mean) ** 2 for v in values) / k)


@dataclass(frozen=True)
class ReplicationSummary:
    outcomes: tuple[ReplicationOutcome, ...]
    tpr_mean: float
    tpr_sd: float
    fpr_mean: float
    fpr_sd: float
    mse_mean: float | None
    mse_sd: float | None
    failures: int
    fingerprint: str


def _run_one(args) -> ReplicationOutcome:
    spec, pipeline, seed = args
    start = time.perf_counter()
    try:
        _result, metrics, mse = run_pipeline(spec, pipeline, seed)
    except (SteinSelectError, np.linalg.LinAlgError) as exc:
        runtime = (time.perf_counter() - start) * 1000.0
        return ReplicationOutcome(
            seed=seed,
            tpr=None,
            fpr=None,
            mse=None,
            runtime_ms=runtime,
            error=f"{type(exc).__name__}: {exc}",
        )
    runtime = (time.perf_counter() - start) * 1000.0
    return ReplicationOutcome(seed=seed, tpr=metrics.tpr, fpr=metrics.fpr, mse=mse, runtime_ms=runtime)


def config_fingerprint(spec: SimSpec, pipeline: PipelineConfig, seeds) -> str:
    doc = {
        "sim": {**spec.to_json(), "seed": None},  # per-seed streams replace it
        "pipeline": pipeline.to_json(),
        "seeds": [int(s) for s in seeds],
    }
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def run_replications(spec: SimSpec, pipeline: PipelineConfig, seeds, jobs: int = 1) -> ReplicationSummary:
    """Run the pipeline once per seed and aggregate; failures are recorded
    per seed without aborting the sweep."""
    seeds = [int(s) for s in seeds]
    if len(seeds) == 0:
        raise ValidationError("need at least one seed")
    if len(set(seeds)) != len(seeds):
        raise ValidationError("seeds must be distinct")
    tasks = [(spec, pipeline, s) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one, tasks))
    else:
        outcomes = [_run_one(t) for t in tasks]
    ok = [o for o in outcomes if o.error is None]
    failures = len(outcomes) - len(ok)
    if ok:
        tprs = [o.tpr for o in ok]
        fprs = [o.fpr for o in ok]
        tpr_mean, tpr_sd = sum(tprs) / len(tprs), _population_sd(tprs)
        fpr_mean, fpr_sd = sum(fprs) / len(fprs), _population_sd(fprs)
    else:
        tpr_mean = tpr_sd = fpr_mean = fpr_sd = float("nan")
    mses = [o.mse for o in ok if o.mse is not None]
    mse_mean = sum(mses) / len(mses) if mses else None
    mse_sd = _population_sd(mses) if mses else None
    return ReplicationSummary(
        outcomes=tuple(outcomes),
        tpr_mean=tpr_mean,
        tpr_sd=tpr_sd,
        fpr_mean=fpr_mean,
        fpr_sd=fpr_sd,
        mse_mean=mse_mean,
        mse_sd=mse_sd,
        failures=failures,
        fingerprint=config_fingerprint(spec, pipeline, seeds),
    )
