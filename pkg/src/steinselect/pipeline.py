"""Shared orchestration: covariance -> (screening ->) moment -> tuning -> selection.

Both the CLI commands and the replication harness route through
``run_selection`` so automatic k1 (eigengap ratio) and automatic s (BIC)
behave identically everywhere. All indices in the returned selection refer
to the original column order of the input dataset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import CovarianceModel, estimate_covariance
from .data import Dataset
from .errors import ValidationError
from .moments import (
    Rule,
    SelectionResult,
    TopSRule,
    lift_selection,
    select,
    stein_moment,
    top_k_rows,
)
from .refit import RefitConfig
from .screening import ScreeningConfig, ScreeningTrace, screen
from .tuning import BicReport, EigengapReport, estimate_k1, estimate_s_bic


@dataclass(frozen=True)
class SelectionPlan:
    """What to run: screening on/off, covariance route, and tuning choices.

    ``k1`` of None triggers the eigengap-ratio rule; a rule of None triggers
    the BIC sweep over ``s_grid`` (defaults to 1..min(bic_grid_max, p)).
    """

    screened: bool = False
    cov_method: str = "sample"  # ignored when a known covariance is passed
    k1: int | None = None
    rule: Rule | None = None
    screening: ScreeningConfig = ScreeningConfig(auto_defaults=True)
    k1_max: int = 15
    k1_rule: str = "ratio-minus-one"
    gamma_rel: float = 1e-8
    bic_grid_max: int = 10
    refit_cfg: RefitConfig = RefitConfig()


@dataclass(frozen=True)
class PipelineArtifacts:
    result: SelectionResult
    trace: ScreeningTrace | None
    eigengap: EigengapReport | None
    bic: BicReport | None


def run_selection(
    d: Dataset, plan: SelectionPlan, known: CovarianceModel | None = None
) -> PipelineArtifacts:
    """Full selection pipeline on a centered dataset.

    The response is centered before moment estimation: the population moment
    E[(y - Ey) T(x)] equals E[y T(x)] because the score has mean zero, but
    the centered form drops the mean(y)-scaled bias that an inexact
    (shrinkage) score would otherwise inject into every entry of the
    empirical moment matrix.
    """
    if not d.centered:
        raise ValidationError("dataset must be centered before selection")
    d = Dataset(X=d.X, y=d.y - d.y.mean(), feature_ids=d.feature_ids, centered=True)
    if plan.screened:
        zeta, p0 = plan.screening.resolve(d.n)
        if plan.k1 is not None and not 1 <= plan.k1 <= p0:
            raise ValidationError(f"need 1 <= k1 <= p0={p0}, got k1={plan.k1}")
        min_keep = plan.k1 if plan.k1 is not None else min(plan.k1_max + 2, d.p)
        outcome = screen(d, plan.screening, known=known, min_keep=min_keep)
        sub, cov, indices, trace = outcome.dataset, outcome.cov, outcome.indices, outcome.trace
    else:
        sub = d
        cov = known if known is not None else estimate_covariance(d, plan.cov_method)
        indices = np.arange(d.p)
        trace = None

    m = stein_moment(sub, cov)
    eigengap = None
    k1 = plan.k1
    if k1 is None:
        k_max = min(plan.k1_max, sub.p - 2)
        eigengap = estimate_k1(m, k_max, gamma_rel=plan.gamma_rel, rule=plan.k1_rule)
        k1 = eigengap.k1_hat

    bic = None
    rule = plan.rule
    if rule is None:
        scores = np.linalg.norm(top_k_rows(m, k1), axis=0)
        grid = range(1, min(plan.bic_grid_max, sub.p) + 1)
        bic = estimate_s_bic(sub, scores, grid, plan.refit_cfg)
        rule = TopSRule(bic.s_hat)

    result = select(m, k1, rule)
    if plan.screened:
        result = lift_selection(result, indices, d.p)
    return PipelineArtifacts(result=result, trace=trace, eigengap=eigengap, bic=bic)
