"""Datasets, CSV ingestion, and the synthetic nonlinear-regression generators.

Five simulation cases are supported. Cases 1-3 are multiple-index models
``y = a' f(W1 x) + eps`` with an elementwise link; Cases 4-5 act directly on
the five support coordinates (an additive model and an interaction model).
Designs are AR(1)-correlated Gaussian or unit-variance Student-t coordinates
colored by the Cholesky factor of the same AR(1) covariance.

All containers are immutable after construction and generation is
deterministic given the seed (single-threaded draw order: design matrix,
support, index weights, noise).
"""

from __future__ import annotations

import csv
import hashlib
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, ParseError, SchemaError, ValidationError

CASES = (1, 2, 3, 4, 5)
INDEX_CASES = (1, 2, 3)
_DESIGN_RE = re.compile(r"^t(\d+(\.\d+)?)$")


def _as_matrix(X) -> np.ndarray:
    X = np.array(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError(f"design matrix must be 2-D, got ndim={X.ndim}")
    return X


@dataclass(frozen=True)
class Dataset:
    """An n x p design matrix with its response vector and column identity."""

    X: np.ndarray
    y: np.ndarray
    feature_ids: tuple[str, ...]
    centered: bool = False

    def __post_init__(self):
        X = _as_matrix(self.X)
        y = np.array(self.y, dtype=float).ravel()
        n, p = X.shape
        if n < 1 or p < 1:
            raise ValidationError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
        if len(y) != n:
            raise ValidationError(f"X has {n} rows but y has length {len(y)}")
        ids = tuple(str(f) for f in self.feature_ids)
        if len(ids) != p:
            raise ValidationError(f"{len(ids)} feature ids for p={p} columns")
        if len(set(ids)) != p:
            raise SchemaError("feature ids are not unique")
        if self.centered:
            col_max = np.abs(X).max(axis=0)
            tol = 1e-10 * (1.0 + col_max)
            means = X.mean(axis=0)
            if np.any(np.abs(means) > tol):
                j = int(np.argmax(np.abs(means) - tol))
                raise ValidationError(
                    f"centered=True but column {ids[j]} has mean {means[j]:.3e}"
                )
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_ids", ids)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        """Column subset keeping the response; centering is preserved."""
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            X=self.X[:, idx],
            y=self.y,
            feature_ids=tuple(self.feature_ids[j] for j in idx),
            centered=self.centered,
        )


def center_columns(d: Dataset) -> Dataset:
    """Subtract each column's sample mean; the response is untouched."""
    X = d.X - d.X.mean(axis=0, keepdims=True)
    return Dataset(X=X, y=d.y, feature_ids=d.feature_ids, centered=True)


# ---------------------------------------------------------------------------
# CSV ingestion / export
# ---------------------------------------------------------------------------

def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        rows = [row for row in reader if row]
    if len(set(header)) != len(header):
        dupes = sorted({c for c in header if header.count(c) > 1})
        raise SchemaError(f"duplicate column(s): {', '.join(dupes)}")
    return header, rows


def _parse_cell(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(
            f"row {row}, column {column!r}: cannot parse {cell!r} as a number",
            row=row,
            column=column,
        ) from None
    if not math.isfinite(value):
        raise ParseError(
            f"row {row}, column {column!r}: non-finite value {cell!r}",
            row=row,
            column=column,
        )
    return value


def read_matrix_csv(path) -> tuple[list[str], np.ndarray]:
    """Read a headed CSV of finite reals. Row numbers in errors are 1-based
    over data rows."""
    header, rows = _read_rows(path)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    data = np.empty((len(rows), len(header)), dtype=float)
    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise ParseError(
                f"row {i}: expected {len(header)} fields, got {len(row)}", row=i
            )
        for j, cell in enumerate(row):
            data[i - 1, j] = _parse_cell(cell, i, header[j])
    return header, data


def load_csv(path, response_column: str) -> Dataset:
    """Load a dataset whose response lives in ``response_column``; remaining
    columns become features in file order."""
    header, data = read_matrix_csv(path)
    if response_column not in header:
        raise SchemaError(f"response column {response_column!r} not in header")
    r = header.index(response_column)
    y = data[:, r]
    X = np.delete(data, r, axis=1)
    ids = tuple(c for k, c in enumerate(header) if k != r)
    if X.shape[1] < 1:
        raise SchemaError("file has no feature columns besides the response")
    return Dataset(X=X, y=y, feature_ids=ids, centered=False)


def save_csv(d: Dataset, path, response_column: str = "y") -> None:
    """Write the dataset back out in the same schema load_csv reads."""
    if response_column in d.feature_ids:
        raise SchemaError(f"response name {response_column!r} collides with a feature id")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([response_column, *d.feature_ids])
        for i in range(d.n):
            writer.writerow([repr(float(d.y[i])), *(repr(float(v)) for v in d.X[i])])


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def parse_design(design: str) -> tuple[str, float | None]:
    """'gaussian' -> ('gaussian', None); 't7' -> ('student_t', 7.0)."""
    if design == "gaussian":
        return "gaussian", None
    m = _DESIGN_RE.match(design)
    if m:
        dof = float(m.group(1))
        if dof <= 2:
            raise ConfigError(f"t design needs dof > 2 for unit-variance scaling, got {dof:g}")
        return "student_t", dof
    raise ConfigError(f"unknown design {design!r}; expected 'gaussian' or 't<dof>' like 't7'")


@dataclass(frozen=True)
class SimSpec:
    """Parameters of one synthetic draw."""

    case: int
    n: int
    p: int
    s: int = 5
    k1: int = 5
    rho: float = 0.0
    design: str = "gaussian"
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.case not in CASES:
            raise ConfigError(f"case must be one of {CASES}, got {self.case}")
        if self.n < 1 or self.p < 1:
            raise ConfigError(f"need n >= 1 and p >= 1, got n={self.n}, p={self.p}")
        if not 1 <= self.s <= self.p:
            raise ConfigError(f"need 1 <= s <= p, got s={self.s}, p={self.p}")
        if self.case in INDEX_CASES and not 1 <= self.k1 <= self.s:
            raise ConfigError(
                f"index cases need 1 <= k1 <= s, got k1={self.k1}, s={self.s}"
            )
        if self.case in (4, 5) and self.s != 5:
            raise ConfigError(f"case {self.case} is fixed at s=5, got s={self.s}")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError(f"need 0 <= rho < 1, got rho={self.rho}")
        if self.noise_sd < 0:
            raise ConfigError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        parse_design(self.design)

    def to_json(self) -> dict:
        return {
            "case": self.case,
            "n": self.n,
            "p": self.p,
            "s": self.s,
            "k1": self.k1,
            "rho": self.rho,
            "design": self.design,
            "noise_sd": self.noise_sd,
            "seed": int(self.seed),
        }


@dataclass(frozen=True)
class GroundTruth:
    """True support plus, for index cases, the generating weights."""

    support: tuple[int, ...]
    w1: np.ndarray | None = None
    a: np.ndarray | None = None

    def __post_init__(self):
        support = tuple(sorted(int(j) for j in self.support))
        object.__setattr__(self, "support", support)
        if self.w1 is not None:
            w1 = np.array(self.w1, dtype=float)
            w1.setflags(write=False)
            nonzero = tuple(int(j) for j in np.flatnonzero(np.linalg.norm(w1, axis=0)))
            if nonzero != support:
                raise ValidationError("nonzero columns of w1 do not match support")
            object.__setattr__(self, "w1", w1)
        if self.a is not None:
            a = np.array(self.a, dtype=float).ravel()
            a.setflags(write=False)
            object.__setattr__(self, "a", a)


def ar1_sigma(p: int, rho: float) -> np.ndarray:
    """AR(1) covariance Sigma[j,k] = rho^|j-k|."""
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :]) if rho != 0.0 else np.eye(p)


def _f1(z):
    return z**2


def _f2(z):
    return z**4 + 2 * z**2 - 10 * np.cos(z)


def _f3(z):
    return np.exp(z) + z**4 - z**2


def _f5(z):
    return z**4 + z**2 - np.cos(z)


_INDEX_LINKS = {1: _f1, 2: _f2, 3: _f3}
_ADDITIVE_LINKS = (_f1, _f2, _f3, _f2, _f5)


def response_surface(case: int, truth: GroundTruth, X: np.ndarray) -> np.ndarray:
    """Noiseless regression function of each case evaluated row-wise."""
    X = _as_matrix(X)
    if case in INDEX_CASES:
        if truth.w1 is None or truth.a is None:
            raise ValidationError(f"case {case} needs w1 and a in the ground truth")
        Z = X @ truth.w1.T
        return _INDEX_LINKS[case](Z) @ truth.a
    Z = X[:, list(truth.support)]
    if Z.shape[1] != 5:
        raise ValidationError(f"case {case} needs exactly 5 support coordinates")
    if case == 4:
        return sum(f(Z[:, t]) for t, f in enumerate(_ADDITIVE_LINKS))
    if case == 5:
        return (
            _f1(Z[:, 0]) * _f2(Z[:, 1]) + _f3(Z[:, 2]) + _f1(Z[:, 3]) * _f5(Z[:, 4])
        )
    raise ConfigError(f"unknown case {case}")


def _draw_design(spec: SimSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    kind, dof = parse_design(spec.design)
    if kind == "gaussian":
        Z = rng.standard_normal((n, spec.p))
    else:
        # Unit-variance t coordinates; correlation enters through the same
        # Cholesky coloring used for the Gaussian design.
        Z = rng.standard_t(dof, size=(n, spec.p)) * math.sqrt((dof - 2.0) / dof)
    if spec.rho == 0.0:
        return Z
    L = np.linalg.cholesky(ar1_sigma(spec.p, spec.rho))
    return Z @ L.T


def _haar_rows(k: int, s: int, rng: np.random.Generator) -> np.ndarray:
    """k orthonormal rows drawn Haar-uniformly in R^s (k <= s)."""
    q, r = np.linalg.qr(rng.standard_normal((s, k)))
    q = q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))
    return q.T


def _draw_truth(spec: SimSpec, rng: np.random.Generator) -> GroundTruth:
    support = np.sort(rng.choice(spec.p, size=spec.s, replace=False))
    if spec.case not in INDEX_CASES:
        return GroundTruth(support=tuple(int(j) for j in support))
    # Random orthonormal index rows: every row has unit l2 norm and every
    # support column carries comparable weight, which keeps all true
    # features recoverable at the sample sizes used in the benchmarks.
    w1 = np.zeros((spec.k1, spec.p))
    w1[:, support] = _haar_rows(spec.k1, spec.s, rng)
    a = rng.uniform(0.5, 1.5, size=spec.k1)
    return GroundTruth(support=tuple(int(j) for j in support), w1=w1, a=a)


def _feature_ids(p: int) -> tuple[str, ...]:
    return tuple(f"x{j}" for j in range(p))


def simulate(spec: SimSpec) -> tuple[Dataset, GroundTruth]:
    """Draw one dataset and its generating truth, deterministically."""
    rng = np.random.default_rng(int(spec.seed))
    X = _draw_design(spec, rng, spec.n)
    truth = _draw_truth(spec, rng)
    y = response_surface(spec.case, truth, X)
    if spec.noise_sd > 0:
        y = y + spec.noise_sd * rng.standard_normal(spec.n)
    d = Dataset(X=X, y=y, feature_ids=_feature_ids(spec.p), centered=False)
    return d, truth


def simulate_from_truth(spec: SimSpec, truth: GroundTruth, n: int, seed: int) -> Dataset:
    """Fresh rows from the same truth; used for held-out evaluation."""
    rng = np.random.default_rng(int(seed))
    X = _draw_design(spec, rng, n)
    y = response_surface(spec.case, truth, X)
    if spec.noise_sd > 0:
        y = y + spec.noise_sd * rng.standard_normal(n)
    return Dataset(X=X, y=y, feature_ids=_feature_ids(spec.p), centered=False)


def derive_seed(master: int, *parts) -> int:
    """Mix a master seed with named sub-stream tags into a fresh 64-bit seed."""
    ints = [int(master)]
    for part in parts:
        if isinstance(part, str):
            digest = hashlib.sha256(part.encode()).digest()
            ints.append(int.from_bytes(digest[:8], "little"))
        else:
            ints.append(int(part))
    return int(np.random.SeedSequence(ints).generate_state(1, np.uint64)[0])


def truth_to_json(truth: GroundTruth, feature_ids: Sequence[str]) -> dict:
    doc = {
        "support": [int(j) for j in truth.support],
        "support_ids": [str(feature_ids[j]) for j in truth.support],
        "w1": None if truth.w1 is None else [[float(v) for v in row] for row in truth.w1],
        "a": None if truth.a is None else [float(v) for v in truth.a],
    }
    return doc
