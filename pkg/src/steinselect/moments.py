"""Empirical Stein moment matrix and eigen-based feature selection.

The moment matrix A_hat = (1/n) sum_i y_i T(x_i) has the same column space
as the transposed first-layer weights of the generating index model, so its
leading eigenvectors (by absolute eigenvalue) recover the relevant columns.
A feature's score is the l2 norm of its column in the k1 x p matrix of
leading eigenvector rows, and selection keeps either everything above a
threshold or the top s scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import CovarianceModel
from .data import Dataset
from .errors import ValidationError


@dataclass(frozen=True)
class SteinMoment:
    """Symmetrized moment matrix with its |lambda|-ordered eigensystem.

    ``eigenvectors`` stores one unit eigenvector per row, ordered to match
    ``eigenvalues``; ties in |lambda| are broken by signed value (descending)
    and then position, and each row's largest-magnitude entry is nonnegative
    (first such entry decides), so the decomposition is reproducible.
    """

    a_hat: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    n_used: int

    def __post_init__(self):
        for name in ("a_hat", "eigenvalues", "eigenvectors"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def p(self) -> int:
        return self.a_hat.shape[0]


def _fix_signs(rows: np.ndarray) -> np.ndarray:
    out = rows.copy()
    for i in range(out.shape[0]):
        j = int(np.argmax(np.abs(out[i])))  # argmax takes the first maximum
        if out[i, j] < 0:
            out[i] = -out[i]
    return out


def _eigensystem(a_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(a_hat)
    order = np.lexsort((np.arange(len(w)), -w, -np.abs(w)))
    return w[order], _fix_signs(v[:, order].T)


def stein_moment(d: Dataset, cov: CovarianceModel) -> SteinMoment:
    """A_hat = symmetrize((1/n) sum_i y_i T(x_i)) with its full eigensystem.

    Evaluated in batched form: with V = X Sigma^{-1},
    A_hat = V' diag(y) V / n - mean(y) Sigma^{-1}.
    """
    if d.n < 1:
        raise ValidationError("empty dataset")
    if not d.centered:
        raise ValidationError("dataset must be centered before moment estimation")
    if d.p != cov.p:
        raise ValidationError(f"dataset has p={d.p} but covariance is {cov.p} x {cov.p}")
    V = d.X @ cov.sigma_inv
    M = (V * d.y[:, None]).T @ V / d.n
    a_hat = M - d.y.mean() * cov.sigma_inv
    a_hat = (a_hat + a_hat.T) / 2.0
    eigenvalues, eigenvectors = _eigensystem(a_hat)
    return SteinMoment(a_hat=a_hat, eigenvalues=eigenvalues, eigenvectors=eigenvectors, n_used=d.n)


def stein_diagonal(d: Dataset, cov: CovarianceModel) -> np.ndarray:
    """diag(A_hat) without forming the p x p matrix; used by screening."""
    if not d.centered:
        raise ValidationError("dataset must be centered before moment estimation")
    if d.p != cov.p:
        raise ValidationError(f"dataset has p={d.p} but covariance is {cov.p} x {cov.p}")
    V = d.X @ cov.sigma_inv
    return np.einsum("i,ij,ij->j", d.y, V, V) / d.n - d.y.mean() * np.diag(cov.sigma_inv)


def top_k_rows(m: SteinMoment, k1: int) -> np.ndarray:
    """First k1 eigenvector rows (leading by |lambda|)."""
    if not 1 <= k1 <= m.p:
        raise ValidationError(f"need 1 <= k1 <= p={m.p}, got k1={k1}")
    return m.eigenvectors[:k1].copy()


@dataclass(frozen=True)
class ThresholdRule:
    """Keep features whose column score reaches kappa."""

    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValidationError(f"kappa must be > 0, got {self.kappa}")

    def to_json(self) -> dict:
        return {"type": "threshold", "kappa": float(self.kappa)}


@dataclass(frozen=True)
class TopSRule:
    """Keep the s best-scoring features (ties to the lower index)."""

    s: int

    def __post_init__(self):
        if not self.s >= 1:
            raise ValidationError(f"s must be >= 1, got {self.s}")

    def to_json(self) -> dict:
        return {"type": "top_s", "s": int(self.s)}


Rule = ThresholdRule | TopSRule


@dataclass(frozen=True)
class SelectionResult:
    """Chosen features with their scores and the tuning metadata used."""

    selected: tuple[int, ...]
    column_scores: np.ndarray
    k1_used: int
    rule: Rule
    w_hat: np.ndarray
    leading_eigenvalues: np.ndarray
    empty_selection: bool = False

    def __post_init__(self):
        for name in ("column_scores", "w_hat", "leading_eigenvalues"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "selected", tuple(int(j) for j in self.selected))

    @property
    def p(self) -> int:
        return self.column_scores.shape[0]


def select(m: SteinMoment, k1: int, rule: Rule) -> SelectionResult:
    """Algorithm step: score columns of the leading eigenvector rows, keep
    the features the rule admits. An empty threshold selection is a valid
    result and only sets ``empty_selection``."""
    w_hat = top_k_rows(m, k1)
    scores = np.linalg.norm(w_hat, axis=0)
    if isinstance(rule, ThresholdRule):
        selected = tuple(int(j) for j in np.flatnonzero(scores >= rule.kappa))
    elif isinstance(rule, TopSRule):
        s = min(rule.s, m.p)
        order = np.argsort(-scores, kind="stable")  # ties fall to the lower index
        selected = tuple(sorted(int(j) for j in order[:s]))
    else:
        raise ValidationError(f"unknown selection rule {rule!r}")
    head = min(2 * k1, m.p)
    return SelectionResult(
        selected=selected,
        column_scores=scores,
        k1_used=k1,
        rule=rule,
        w_hat=w_hat,
        leading_eigenvalues=m.eigenvalues[:head],
        empty_selection=len(selected) == 0,
    )


def lift_selection(result: SelectionResult, indices, p: int) -> SelectionResult:
    """Embed a selection made on a column subset back into the original
    p-dimensional frame (scores and w_hat are zero off the subset)."""
    idx = np.asarray(indices, dtype=int)
    if len(idx) != result.p:
        raise ValidationError(f"subset has {len(idx)} columns but result has p={result.p}")
    scores = np.zeros(p)
    scores[idx] = result.column_scores
    w_hat = np.zeros((result.w_hat.shape[0], p))
    w_hat[:, idx] = result.w_hat
    return SelectionResult(
        selected=tuple(sorted(int(idx[j]) for j in result.selected)),
        column_scores=scores,
        k1_used=result.k1_used,
        rule=result.rule,
        w_hat=w_hat,
        leading_eigenvalues=result.leading_eigenvalues,
        empty_selection=result.empty_selection,
    )


def selection_to_json(result: SelectionResult, feature_ids) -> dict:
    doc = {
        "selected": [str(feature_ids[j]) for j in result.selected],
        "selected_indices": [int(j) for j in result.selected],
        "scores": [float(v) for v in result.column_scores],
        "k1": int(result.k1_used),
        "rule": result.rule.to_json(),
        "eigenvalues": [float(v) for v in result.leading_eigenvalues],
    }
    if result.empty_selection:
        doc["warning"] = "empty_selection"
    return doc
