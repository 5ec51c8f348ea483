"""Covariance estimation and the Gaussian second-order score.

For a centered Gaussian design with covariance Sigma the second-order score is

    T(x) = Sigma^{-1} x x' Sigma^{-1} - Sigma^{-1},

which is the kernel of the moment estimator downstream. Three covariance
routes feed it: a user-supplied known matrix, the sample covariance
S = X'X / n, and Ledoit-Wolf shrinkage for the p > n regime.

The shrinkage estimate is Sigma_LW = (1 - delta) S + delta mu I with
mu = tr(S)/p and intensity

    delta = min(b2, d2) / d2,
    d2 = ||S - mu I||_F^2 / p,
    b2 = (1/n^2) sum_i ||x_i x_i' - S||_F^2 / p,

the single-target identity-shrinkage estimator of Ledoit and Wolf (2004).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import Dataset, center_columns
from .errors import DegenerateDataError, RankError, ValidationError

_METHODS = ("known", "sample", "ledoit_wolf")


@dataclass(frozen=True)
class CovarianceModel:
    """A positive-definite covariance with its inverse, tagged by method."""

    sigma: np.ndarray
    sigma_inv: np.ndarray
    method: str
    min_eig: float
    shrinkage: float | None = None

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float)
        inv = np.array(self.sigma_inv, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValidationError(f"sigma must be square, got shape {sigma.shape}")
        if inv.shape != sigma.shape:
            raise ValidationError("sigma and sigma_inv shapes differ")
        scale = max(np.abs(sigma).max(), 1e-300)
        if np.abs(sigma - sigma.T).max() > 1e-10 * scale:
            raise ValidationError("sigma is not symmetric within 1e-10 relative")
        if self.method not in _METHODS:
            raise ValidationError(f"method must be one of {_METHODS}")
        if not self.min_eig > 0:
            raise ValidationError(f"covariance must be positive definite, min_eig={self.min_eig:.3e}")
        sigma.setflags(write=False)
        inv.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "sigma_inv", inv)

    @property
    def p(self) -> int:
        return self.sigma.shape[0]


def _invert_spd(sigma: np.ndarray) -> tuple[np.ndarray, float]:
    """Inverse through a Cholesky factorization; returns (inverse, min eigenvalue)."""
    sigma = (sigma + sigma.T) / 2.0
    min_eig = float(scipy.linalg.eigvalsh(sigma, subset_by_index=(0, 0))[0])
    if min_eig <= 0:
        raise RankError(f"matrix is not positive definite (min eigenvalue {min_eig:.3e})")
    factor = scipy.linalg.cho_factor(sigma, lower=True)
    inv = scipy.linalg.cho_solve(factor, np.eye(sigma.shape[0]))
    inv = (inv + inv.T) / 2.0
    return inv, min_eig


def known_covariance(sigma: np.ndarray) -> CovarianceModel:
    """Wrap a user-supplied positive-definite covariance."""
    sigma = np.array(sigma, dtype=float)
    sigma = (sigma + sigma.T) / 2.0
    inv, min_eig = _invert_spd(sigma)
    return CovarianceModel(sigma=sigma, sigma_inv=inv, method="known", min_eig=min_eig)


def subset_known(cov: CovarianceModel, indices) -> CovarianceModel:
    """Principal submatrix of a known Sigma with its inverse recomputed.

    The marginal covariance of a Gaussian subvector is the principal
    submatrix of Sigma, so the subset score needs its inverse, not the
    submatrix of Sigma^{-1}.
    """
    idx = np.asarray(indices, dtype=int)
    return known_covariance(cov.sigma[np.ix_(idx, idx)])


def _centered(d: Dataset) -> Dataset:
    return d if d.centered else center_columns(d)


def sample_covariance(d: Dataset) -> CovarianceModel:
    """S = X'X / n on centered columns; fails loudly when near-singular."""
    if d.n < 2:
        raise ValidationError(f"sample covariance needs n >= 2, got n={d.n}")
    d = _centered(d)
    S = d.X.T @ d.X / d.n
    S = (S + S.T) / 2.0
    jitter_floor = 1e-10 * np.trace(S) / d.p
    min_eig = float(scipy.linalg.eigvalsh(S, subset_by_index=(0, 0))[0])
    if min_eig <= jitter_floor:
        raise RankError(
            f"sample covariance is singular or near-singular "
            f"(min eigenvalue {min_eig:.3e} <= floor {jitter_floor:.3e}); "
            "use ledoit_wolf_covariance instead"
        )
    inv, _ = _invert_spd(S)
    return CovarianceModel(sigma=S, sigma_inv=inv, method="sample", min_eig=min_eig)


def ledoit_wolf_shrinkage(X: np.ndarray) -> float:
    """Shrinkage intensity delta in [0, 1] for centered rows of X."""
    n, p = X.shape
    S = X.T @ X / n
    mu = np.trace(S) / p
    d2 = np.sum((S - mu * np.eye(p)) ** 2) / p
    if d2 <= 0:
        # S already equals mu * I, so every intensity yields the same matrix.
        return 1.0
    X2 = X**2
    b2_bar = np.sum(X2.T @ X2 / n - S**2) / (p * n)
    b2 = min(b2_bar, d2)
    return float(b2 / d2)


def ledoit_wolf_covariance(d: Dataset, shrinkage: float | None = None) -> CovarianceModel:
    """Shrunk covariance (1 - delta) S + delta mu I, positive definite even
    when p > n. ``shrinkage`` overrides the estimated intensity.

    S is the raw second moment X'X / n (rows are assumed to have mean zero,
    as in the model); center the dataset first if it is not.
    """
    if d.n < 2:
        raise ValidationError(f"Ledoit-Wolf needs n >= 2, got n={d.n}")
    X = d.X
    if not np.any(X):
        raise DegenerateDataError("degenerate input: design is all zero")
    n, p = X.shape
    S = X.T @ X / n
    S = (S + S.T) / 2.0
    mu = np.trace(S) / p
    if shrinkage is None:
        delta = ledoit_wolf_shrinkage(X)
    else:
        if not 0.0 <= shrinkage <= 1.0:
            raise ValidationError(f"shrinkage must lie in [0, 1], got {shrinkage}")
        delta = float(shrinkage)
    sigma = (1.0 - delta) * S + delta * mu * np.eye(p)
    sigma = (sigma + sigma.T) / 2.0
    try:
        inv, min_eig = _invert_spd(sigma)
    except RankError:
        # Only reachable when delta == 0 exactly and S is singular, which
        # requires every centered sample to share one outer product.
        raise DegenerateDataError(
            "degenerate input: zero shrinkage intensity with a singular sample covariance"
        ) from None
    return CovarianceModel(
        sigma=sigma, sigma_inv=inv, method="ledoit_wolf", min_eig=min_eig, shrinkage=delta
    )


def estimate_covariance(d: Dataset, method: str) -> CovarianceModel:
    if method == "sample":
        return sample_covariance(d)
    if method == "ledoit_wolf":
        return ledoit_wolf_covariance(d)
    raise ValidationError(f"unknown covariance method {method!r}")


def second_order_score(x: np.ndarray, cov: CovarianceModel) -> np.ndarray:
    """T(x) = v v' - Sigma^{-1} with v = Sigma^{-1} x; exactly symmetric."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != cov.p:
        raise ValidationError(f"x has length {x.shape[0]}, covariance is {cov.p} x {cov.p}")
    v = cov.sigma_inv @ x
    return np.outer(v, v) - cov.sigma_inv


def save_covariance_csv(cov: CovarianceModel, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in cov.sigma:
            writer.writerow([repr(float(v)) for v in row])


def load_covariance_csv(path) -> CovarianceModel:
    """Read a headerless numeric matrix CSV as a known covariance."""
    sigma = np.loadtxt(path, delimiter=",", ndmin=2)
    if sigma.shape[0] != sigma.shape[1]:
        raise ValidationError(f"covariance file must be square, got shape {sigma.shape}")
    return known_covariance(sigma)
