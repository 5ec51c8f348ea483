"""Data-driven choice of the eigen rank k1 and the sparsity level s.

k1 comes from the absolute eigengap ratio

    r(k) = (|l_{k-1}| - |l_k|) / (|l_k| - |l_{k+1}| + gamma_reg),

whose peak sits at the first noise index k1 + 1 (the numerator there is the
signal-to-noise drop), so the default rule subtracts one from the argmax.
s comes from BIC = n ln(MSE(s)) + 100 s ln(n), where MSE(s) is the training
error of a refit network on the top-s ranked features with a seed held fixed
across the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import NumericalError, ValidationError
from .moments import SteinMoment
from .refit import RefitConfig, train

K1_RULES = ("ratio-minus-one", "ratio")
DEFAULT_LAMBDA_SCALE = 100.0


@dataclass(frozen=True)
class EigengapReport:
    """|lambda| spectrum, gaps, ratio statistic, and the chosen rank."""

    abs_eigenvalues: np.ndarray
    gaps: np.ndarray
    ratios: np.ndarray
    k_values: np.ndarray
    k1_hat: int
    gamma_reg: float
    rule: str

    def __post_init__(self):
        for name in ("abs_eigenvalues", "gaps", "ratios", "k_values"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def to_json(self) -> dict:
        return {
            "abs_eigenvalues": [float(v) for v in self.abs_eigenvalues],
            "gaps": [float(v) for v in self.gaps],
            "k": [int(k) for k in self.k_values],
            "ratios": [float(v) for v in self.ratios],
            "k1_hat": int(self.k1_hat),
            "gamma_reg": float(self.gamma_reg),
            "rule": self.rule,
        }

    def to_csv_rows(self) -> list[tuple[int, float]]:
        """(k, r(k)) pairs for plotting."""
        return [(int(k), float(r)) for k, r in zip(self.k_values, self.ratios)]


def estimate_k1(
    m: SteinMoment, k_max: int, gamma_rel: float = 1e-8, rule: str = "ratio-minus-one"
) -> EigengapReport:
    """Locate the signal/noise boundary of the |lambda| spectrum."""
    if k_max < 2:
        raise ValidationError(f"k_max must be >= 2, got {k_max}")
    if k_max > m.p - 2:
        raise ValidationError(f"k_max must be <= p - 2 = {m.p - 2}, got {k_max}")
    if not gamma_rel > 0:
        raise ValidationError(f"gamma_rel must be > 0, got {gamma_rel}")
    if rule not in K1_RULES:
        raise ValidationError(f"rule must be one of {K1_RULES}")
    lam = np.abs(m.eigenvalues)
    gamma_reg = gamma_rel * max(lam[0], 1.0)
    gaps = lam[:-1] - lam[1:]
    ks = np.arange(2, k_max + 1)
    ratios = (lam[ks - 2] - lam[ks - 1]) / (lam[ks - 1] - lam[ks] + gamma_reg)
    k_star = int(ks[np.argmax(ratios)])  # ties fall to the smaller k
    k1_hat = k_star - 1 if rule == "ratio-minus-one" else k_star
    return EigengapReport(
        abs_eigenvalues=lam,
        gaps=gaps,
        ratios=ratios,
        k_values=ks,
        k1_hat=k1_hat,
        gamma_reg=gamma_reg,
        rule=rule,
    )


def estimate_k1_threshold(m: SteinMoment, tau: float) -> int:
    """Largest j whose gap |l_j| - |l_{j+1}| exceeds tau."""
    if not tau > 0:
        raise ValidationError(f"tau must be > 0, got {tau}")
    lam = np.abs(m.eigenvalues)
    gaps = lam[:-1] - lam[1:]
    qualifying = np.flatnonzero(gaps > tau)
    if len(qualifying) == 0:
        raise NumericalError(f"no eigengap exceeds tau={tau:g}")
    return int(qualifying[-1] + 1)


def bic_value(n: int, mse: float, s: int, lambda_scale: float = DEFAULT_LAMBDA_SCALE) -> float:
    return n * math.log(max(mse, 1e-300)) + lambda_scale * s * math.log(n)


@dataclass(frozen=True)
class BicCandidate:
    s: int
    train_mse: float
    bic: float
    selected: tuple[int, ...]


@dataclass(frozen=True)
class BicReport:
    candidates: tuple[BicCandidate, ...]
    s_hat: int
    lambda_rule: str
    n: int

    def to_json(self) -> dict:
        return {
            "candidates": [
                {
                    "s": c.s,
                    "train_mse": c.train_mse,
                    "bic": c.bic,
                    "selected_indices": [int(j) for j in c.selected],
                }
                for c in self.candidates
            ],
            "s_hat": int(self.s_hat),
            "lambda_rule": self.lambda_rule,
            "n": int(self.n),
        }

    def to_csv_rows(self) -> list[tuple[int, float]]:
        """(s, bic) pairs for plotting."""
        return [(c.s, c.bic) for c in self.candidates]


def rank_features(ranking: np.ndarray) -> np.ndarray:
    """Indices ordered by descending score, ties to the lower index."""
    return np.argsort(-np.asarray(ranking, dtype=float), kind="stable")


def estimate_s_bic(
    d: Dataset,
    ranking: np.ndarray,
    s_grid,
    refit_cfg: RefitConfig,
    lambda_scale: float = DEFAULT_LAMBDA_SCALE,
) -> BicReport:
    """BIC sweep over candidate sparsity levels using refit training MSE.

    The refit seed is held fixed across the grid so score differences come
    from the feature count and not from initialization noise.
    """
    ranking = np.asarray(ranking, dtype=float)
    if ranking.shape[0] != d.p:
        raise ValidationError(f"ranking length {ranking.shape[0]} != p={d.p}")
    grid = [int(s) for s in s_grid]
    if len(grid) == 0:
        raise ValidationError("s_grid is empty")
    if any(not 1 <= s <= d.p for s in grid):
        raise ValidationError(f"every s must lie in [1, p={d.p}], got {grid}")
    order = rank_features(ranking)
    candidates = []
    for s in grid:
        selected = tuple(sorted(int(j) for j in order[:s]))
        try:
            model = train(d, selected, refit_cfg)
        except Exception as exc:
            exc.args = (f"refit failed at s={s}: {exc}",)
            raise
        mse = float(model.loss_curve[-1])
        candidates.append(
            BicCandidate(s=s, train_mse=mse, bic=bic_value(d.n, mse, s, lambda_scale), selected=selected)
        )
    best = min(candidates, key=lambda c: (c.bic, c.s))  # ties to the smaller s
    return BicReport(
        candidates=tuple(candidates),
        s_hat=best.s,
        lambda_rule=f"{lambda_scale:g}*s",
        n=d.n,
    )
