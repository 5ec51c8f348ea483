"""Iterative diagonal-magnitude screening ahead of eigen-selection.

Off-support coordinates have zero diagonal in the population moment matrix,
so each round ranks coordinates by |diag(A_hat)| on the surviving subset,
keeps the top floor(zeta * p) of them, and re-estimates both the covariance
and the moment diagonal on the survivors. Once the subset is no larger than
the target dimension p0, ordinary eigen-selection runs on it.

Covariance per round: the principal submatrix (inverse recomputed) when a
known Sigma is supplied, otherwise Ledoit-Wolf while the subset is larger
than n/2 and the sample covariance after that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import (
    CovarianceModel,
    ledoit_wolf_covariance,
    sample_covariance,
    subset_known,
)
from .data import Dataset
from .errors import ConfigError, IterationLimitError, ValidationError
from .moments import Rule, SelectionResult, lift_selection, select, stein_diagonal, stein_moment

AUTO_ZETA_SCALE = 2.0
AUTO_P0_SCALE = 2.0
ZETA_CLAMP = 0.9


@dataclass(frozen=True)
class ScreeningConfig:
    """Per-round keep fraction and stopping dimension, or auto defaults
    zeta = min(0.9, 2 n^{-1/3}) and p0 = ceil(2 n^{1/3})."""

    zeta: float | None = None
    p0: int | None = None
    auto_defaults: bool = False
    max_rounds: int = 64

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ConfigError(f"max_rounds must be >= 1, got {self.max_rounds}")
        if self.auto_defaults:
            return
        if self.zeta is None or self.p0 is None:
            raise ConfigError("set zeta and p0 explicitly or enable auto_defaults")
        if not 0.0 < self.zeta < 1.0:
            raise ConfigError(f"zeta must lie in (0, 1), got {self.zeta}")
        if self.p0 < 1:
            raise ConfigError(f"p0 must be >= 1, got {self.p0}")

    def resolve(self, n: int) -> tuple[float, int]:
        if self.auto_defaults:
            cube = float(n) ** (1.0 / 3.0)
            return min(ZETA_CLAMP, AUTO_ZETA_SCALE / cube), int(math.ceil(AUTO_P0_SCALE * cube))
        return float(self.zeta), int(self.p0)


@dataclass(frozen=True)
class ScreeningRound:
    """One round's candidates, the |diag| values ranked, and the survivors."""

    input_indices: np.ndarray
    diag_abs: np.ndarray
    kept_indices: np.ndarray

    def __post_init__(self):
        for name in ("input_indices", "diag_abs", "kept_indices"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class ScreeningTrace:
    rounds: tuple[ScreeningRound, ...]
    final_indices: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.final_indices, dtype=int)
        arr.setflags(write=False)
        object.__setattr__(self, "final_indices", arr)


def round_sizes(p: int, zeta: float, p0: int, max_rounds: int = 64) -> list[int]:
    """Subset sizes produced by the floor(zeta * p) recurrence, starting at p
    and stopping once the size is <= p0. Raises on a zero keep count or on
    hitting the round cap."""
    sizes = [p]
    while sizes[-1] > p0:
        if len(sizes) - 1 >= max_rounds:
            raise IterationLimitError(f"screening did not reach p0={p0} within {max_rounds} rounds")
        keep = int(math.floor(zeta * sizes[-1]))
        if keep < 1:
            raise ConfigError(f"zeta={zeta:g} keeps zero of {sizes[-1]} coordinates")
        sizes.append(keep)
    return sizes


def _keep_top(diag_abs: np.ndarray, keep: int) -> np.ndarray:
    order = np.argsort(-diag_abs, kind="stable")  # ties fall to the lower index
    return np.sort(order[:keep])


def screen_once(d: Dataset, cov: CovarianceModel, zeta: float) -> np.ndarray:
    """One ranking round on the given (sub)dataset; returns the kept column
    indices of ``d``, sorted."""
    if d.p < 2:
        raise ValidationError(f"screening needs at least 2 columns, got p={d.p}")
    if not 0.0 < zeta < 1.0:
        raise ConfigError(f"zeta must lie in (0, 1), got {zeta}")
    keep = int(math.floor(zeta * d.p))
    if keep < 1:
        raise ConfigError(f"zeta={zeta:g} keeps zero of {d.p} coordinates")
    diag_abs = np.abs(stein_diagonal(d, cov))
    return _keep_top(diag_abs, keep)


def _round_covariance(d: Dataset, known: CovarianceModel | None, indices: np.ndarray) -> CovarianceModel:
    if known is not None:
        return subset_known(known, indices)
    if d.p > d.n / 2:
        return ledoit_wolf_covariance(d)
    return sample_covariance(d)


@dataclass(frozen=True)
class ScreenOutcome:
    """Survivor subset with the covariance already estimated on it."""

    dataset: Dataset
    indices: np.ndarray
    trace: ScreeningTrace
    cov: CovarianceModel


def screen(
    d: Dataset,
    cfg: ScreeningConfig,
    known: CovarianceModel | None = None,
    min_keep: int = 1,
) -> ScreenOutcome:
    """Run screening rounds until the subset dimension is <= p0.

    ``min_keep`` floors the per-round keep count so downstream eigen-selection
    always has enough columns (callers pass k1).
    """
    zeta, p0 = cfg.resolve(d.n)
    if known is not None and known.p != d.p:
        raise ValidationError(f"known covariance is {known.p} x {known.p} but p={d.p}")
    indices = np.arange(d.p)
    current = d
    rounds: list[ScreeningRound] = []
    while current.p > p0:
        if len(rounds) >= cfg.max_rounds:
            trace = ScreeningTrace(rounds=tuple(rounds), final_indices=indices)
            raise IterationLimitError(
                f"screening still at {current.p} > p0={p0} after {cfg.max_rounds} rounds",
                trace=trace,
            )
        keep = int(math.floor(zeta * current.p))
        keep = max(keep, min(min_keep, current.p))
        if keep < 1:
            raise ConfigError(f"zeta={zeta:g} keeps zero of {current.p} coordinates")
        cov = _round_covariance(current, known, indices)
        diag_abs = np.abs(stein_diagonal(current, cov))
        local_kept = _keep_top(diag_abs, keep)
        kept = indices[local_kept]
        rounds.append(
            ScreeningRound(input_indices=indices, diag_abs=diag_abs, kept_indices=kept)
        )
        indices = kept
        current = current.subset(local_kept)
    cov = _round_covariance(current, known, indices)
    trace = ScreeningTrace(rounds=tuple(rounds), final_indices=indices)
    return ScreenOutcome(dataset=current, indices=indices, trace=trace, cov=cov)


def screen_and_select(
    d: Dataset,
    cfg: ScreeningConfig,
    k1: int,
    rule: Rule,
    known: CovarianceModel | None = None,
) -> tuple[SelectionResult, ScreeningTrace]:
    """Screening followed by eigen-selection on the survivors; every index in
    the result refers to the original column order of ``d``."""
    zeta, p0 = cfg.resolve(d.n)
    if not 1 <= k1 <= p0:
        raise ValidationError(f"need 1 <= k1 <= p0={p0}, got k1={k1}")
    outcome = screen(d, cfg, known=known, min_keep=k1)
    m = stein_moment(outcome.dataset, outcome.cov)
    result = select(m, k1, rule)
    return lift_selection(result, outcome.indices, d.p), outcome.trace


def trace_to_json(trace: ScreeningTrace, feature_ids) -> dict:
    return {
        "rounds": [
            {
                "size": int(len(r.input_indices)),
                "kept": [str(feature_ids[j]) for j in r.kept_indices],
                "kept_indices": [int(j) for j in r.kept_indices],
            }
            for r in trace.rounds
        ],
        "final": [str(feature_ids[j]) for j in trace.final_indices],
        "final_indices": [int(j) for j in trace.final_indices],
    }
