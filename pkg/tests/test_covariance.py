import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steinselect import (
    Dataset,
    DegenerateDataError,
    RankError,
    ar1_sigma,
    center_columns,
    known_covariance,
    ledoit_wolf_covariance,
    ledoit_wolf_shrinkage,
    load_covariance_csv,
    sample_covariance,
    save_covariance_csv,
    second_order_score,
    simulate,
    subset_known,
    SimSpec,
)
from steinselect.errors import ValidationError


def dataset(X, centered=False):
    X = np.asarray(X, dtype=float)
    return Dataset(X=X, y=np.zeros(X.shape[0]), feature_ids=[f"x{j}" for j in range(X.shape[1])], centered=centered)


class TestSampleCovariance:
    def test_degenerate_column_raises(self):
        d = dataset([[1, 0], [-1, 0], [1, 0], [-1, 0]], centered=True)
        with pytest.raises(RankError, match="ledoit_wolf"):
            sample_covariance(d)

    def test_monte_carlo_identity(self):
        rng = np.random.default_rng(42)
        d = center_columns(dataset(rng.standard_normal((100_000, 3))))
        cov = sample_covariance(d)
        assert np.abs(cov.sigma - np.eye(3)).max() < 0.05

    def test_one_dimensional(self):
        cov = sample_covariance(dataset([[2.0], [-2.0]], centered=True))
        assert cov.sigma[0, 0] == pytest.approx(4.0)
        assert cov.sigma_inv[0, 0] == pytest.approx(0.25)
        assert cov.method == "sample"

    def test_centers_internally(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((500, 2)) + 10.0
        c1 = sample_covariance(dataset(X))
        c2 = sample_covariance(center_columns(dataset(X)))
        assert np.allclose(c1.sigma, c2.sigma)

    def test_inverse_contract(self):
        rng = np.random.default_rng(3)
        d = center_columns(dataset(rng.standard_normal((200, 8))))
        cov = sample_covariance(d)
        resid = cov.sigma_inv @ cov.sigma - np.eye(8)
        assert np.linalg.norm(resid) / np.sqrt(8) < 1e-6


class TestLedoitWolf:
    def test_monte_carlo_identity(self):
        rng = np.random.default_rng(7)
        d = center_columns(dataset(rng.standard_normal((10_000, 10))))
        cov = ledoit_wolf_covariance(d)
        assert np.abs(cov.sigma - np.eye(10)).max() < 0.05

    def test_positive_definite_when_p_exceeds_n(self):
        rng = np.random.default_rng(8)
        d = dataset(rng.standard_normal((2, 50)))
        cov = ledoit_wolf_covariance(d)
        assert cov.min_eig > 0
        assert cov.method == "ledoit_wolf"
        with pytest.raises(RankError):
            sample_covariance(d)

    def test_full_shrinkage_endpoint(self):
        rng = np.random.default_rng(9)
        d = center_columns(dataset(rng.standard_normal((30, 4))))
        cov = ledoit_wolf_covariance(d, shrinkage=1.0)
        S = d.X.T @ d.X / d.n
        mu = np.trace(S) / 4
        assert np.allclose(cov.sigma, mu * np.eye(4))

    def test_all_zero_raises(self):
        with pytest.raises(DegenerateDataError):
            ledoit_wolf_covariance(dataset(np.zeros((5, 3)), centered=True))

    def test_matches_direct_formula(self):
        # independent oracle: the 2004 closed form evaluated longhand
        rng = np.random.default_rng(10)
        X = rng.standard_normal((40, 6)) @ np.diag([1, 1, 2, 2, 3, 3.0])
        X = X - X.mean(axis=0)
        n, p = X.shape
        S = X.T @ X / n
        mu = np.trace(S) / p
        d2 = np.sum((S - mu * np.eye(p)) ** 2) / p
        b2_bar = sum(np.sum((np.outer(x, x) - S) ** 2) for x in X) / (n**2 * p)
        delta = min(b2_bar, d2) / d2
        cov = ledoit_wolf_covariance(dataset(X, centered=True))
        assert cov.shrinkage == pytest.approx(delta, rel=1e-10)
        assert np.allclose(cov.sigma, (1 - delta) * S + delta * mu * np.eye(p))


@settings(deadline=None, max_examples=25)
@given(
    n=st.integers(2, 12),
    p=st.integers(1, 8),
    seed=st.integers(0, 10_000),
)
def test_ledoit_wolf_bounds(n, p, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    d = dataset(X)
    cov = ledoit_wolf_covariance(d)
    assert 0.0 <= cov.shrinkage <= 1.0
    S = X.T @ X / n
    mu = np.trace(S) / p
    assert cov.min_eig >= cov.shrinkage * mu * (1 - 1e-12)


class TestKnownCovariance:
    def test_round_trip_csv(self, tmp_path):
        sigma = ar1_sigma(4, 0.5)
        cov = known_covariance(sigma)
        path = tmp_path / "sigma.csv"
        save_covariance_csv(cov, path)
        back = load_covariance_csv(path)
        assert np.array_equal(back.sigma, cov.sigma)
        assert back.method == "known"

    def test_rejects_indefinite(self):
        with pytest.raises(RankError):
            known_covariance(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_subset_inverts_principal_submatrix(self):
        sigma = ar1_sigma(6, 0.5)
        cov = known_covariance(sigma)
        idx = [0, 2, 5]
        sub = subset_known(cov, idx)
        assert np.allclose(sub.sigma, sigma[np.ix_(idx, idx)])
        # marginal inverse, not the submatrix of the full inverse
        assert np.allclose(sub.sigma_inv, np.linalg.inv(sigma[np.ix_(idx, idx)]))
        assert not np.allclose(sub.sigma_inv, cov.sigma_inv[np.ix_(idx, idx)])


class TestSecondOrderScore:
    def test_zero_input(self):
        cov = known_covariance(np.eye(3))
        assert np.array_equal(second_order_score(np.zeros(3), cov), -np.eye(3))

    def test_unit_vector(self):
        cov = known_covariance(np.eye(2))
        t = second_order_score(np.array([1.0, 0.0]), cov)
        assert np.allclose(t, np.array([[0.0, 0.0], [0.0, -1.0]]))

    def test_diagonal_sigma_hand_oracle(self):
        # Sigma = diag(4, 1), x = (2, 0): v = (0.5, 0), vv' - inv = [[0,0],[0,-1]]
        cov = known_covariance(np.diag([4.0, 1.0]))
        t = second_order_score(np.array([2.0, 0.0]), cov)
        assert np.allclose(t, np.array([[0.0, 0.0], [0.0, -1.0]]))

    def test_exact_symmetry(self):
        rng = np.random.default_rng(11)
        sigma = ar1_sigma(5, 0.4)
        cov = known_covariance(sigma)
        for _ in range(10):
            t = second_order_score(rng.standard_normal(5), cov)
            assert np.array_equal(t, t.T)

    def test_dimension_mismatch(self):
        cov = known_covariance(np.eye(3))
        with pytest.raises(ValidationError):
            second_order_score(np.zeros(4), cov)

    def test_zero_mean_over_gaussian_draws(self):
        sigma = ar1_sigma(4, 0.3)
        cov = known_covariance(sigma)
        d, _ = simulate(SimSpec(case=1, n=100_000, p=4, rho=0.3, s=2, k1=2, seed=21))
        V = d.X @ cov.sigma_inv
        mean_t = (V.T @ V) / d.n - cov.sigma_inv
        assert np.abs(mean_t).max() <= 0.05


def test_stein_identity_quadratic_oracle():
    # For g(x) = x'Bx with x ~ N(0, I), E[g(x) T(x)] equals the constant
    # Hessian B + B'.
    rng = np.random.default_rng(33)
    B = rng.standard_normal((4, 4))
    n = 200_000
    X = rng.standard_normal((n, 4))
    y = np.einsum("ij,jk,ik->i", X, B, X)
    cov = known_covariance(np.eye(4))
    V = X  # sigma_inv is the identity
    a_hat = (V * y[:, None]).T @ V / n - y.mean() * np.eye(4)
    assert np.abs(a_hat - (B + B.T)).max() <= 0.1
